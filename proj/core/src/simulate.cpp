#include "affiltest/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

#include "affiltest/error.hpp"
#include "affiltest/random.hpp"

namespace affiltest {

std::vector<Tuple> sample(const Dgp& dgp, std::size_t t, std::uint64_t seed) {
  const CellArray& p = dgp.masses;
  const GridSpec& grid = p.grid();
  std::vector<double> cumulative(p.size());
  std::partial_sum(p.values().begin(), p.values().end(), cumulative.begin());
  const double total = cumulative.back();
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "DGP has no mass");

  std::mt19937_64 engine(seed);
  const auto r = grid.breakpoints();
  std::vector<Tuple> out;
  out.reserve(t);
  for (std::size_t s = 0; s < t; ++s) {
    const double u = uniform01(engine) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    // Skip zero-mass cells that share the cumulative value.
    if (it == cumulative.end()) it = std::prev(it);
    while (p[static_cast<std::size_t>(it - cumulative.begin())] == 0.0 && it != cumulative.begin()) --it;
    const CellIndex cell = grid.index(static_cast<std::size_t>(it - cumulative.begin()));
    Tuple x(cell.size());
    for (std::size_t n = 0; n < cell.size(); ++n) {
      const int j = cell[n];
      const double v = r[j - 1] + (1.0 - uniform01(engine)) * (r[j] - r[j - 1]);
      x[n] = std::min(v, r[j]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

Density positive_dependence_density(int bidders, double beta) {
  if (bidders < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two bidders");
  if (!(beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be nonnegative");
  auto kernel = [beta](std::span<const double> u) {
    double s = 0.0;
    for (std::size_t a = 0; a < u.size(); ++a)
      for (std::size_t b = a + 1; b < u.size(); ++b) s += u[a] * u[b];
    return std::exp(beta * s);
  };
  // Normalizing constant by a product midpoint rule.
  const int res = std::max(8, static_cast<int>(std::pow(1.6e5, 1.0 / bidders)));
  std::vector<int> idx(static_cast<std::size_t>(bidders), 0);
  std::vector<double> point(static_cast<std::size_t>(bidders));
  double z = 0.0;
  for (;;) {
    for (int n = 0; n < bidders; ++n) point[n] = (idx[n] + 0.5) / res;
    z += kernel(point);
    int n = bidders - 1;
    while (n >= 0 && ++idx[n] == res) idx[n--] = 0;
    if (n < 0) break;
  }
  z /= std::pow(static_cast<double>(res), bidders);
  return [kernel, z](std::span<const double> u) { return kernel(u) / z; };
}

Dgp uniform_dgp(int k, int bidders) {
  const GridSpec grid = GridSpec::equispaced(k, bidders);
  const std::size_t cells = grid.num_cells();
  return {CellArray(grid, CellKind::kMass, std::vector<double>(cells, 1.0 / cells)), "uniform"};
}

Dgp independent_skewed_dgp(int k, int bidders, double ratio) {
  if (!(ratio > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ratio must be positive");
  const GridSpec grid = GridSpec::equispaced(k, bidders);
  std::vector<double> q(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) q[j] = std::pow(ratio, j);
  const double s = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& v : q) v /= s;
  CellArray m(grid, CellKind::kMass);
  for (std::size_t c = 0; c < m.size(); ++c) {
    double p = 1.0;
    for (int i : grid.index(c)) p *= q[static_cast<std::size_t>(i - 1)];
    m[c] = p;
  }
  return {std::move(m), "independent-skewed"};
}

namespace {

Dgp symmetric_2x2(double diag, double off, std::string label) {
  const GridSpec grid = GridSpec::equispaced(2, 2);
  return {CellArray(grid, CellKind::kMass, {diag, off, off, diag}), std::move(label)};
}

}  // namespace

Dgp affiliated_2x2(double rho) {
  if (!(rho >= 0.0 && rho <= 0.25)) {
    throw Error(ErrorCode::kInvalidArgument, "rho must lie in [0, 1/4]");
  }
  // a + d = 1/2 and a^2 - d^2 = rho give a - d = 2 rho.
  return symmetric_2x2(0.25 + rho, 0.25 - rho, "affiliated-2x2");
}

Dgp violating_2x2(double margin) {
  if (!(margin > 0.0 && margin < 0.25)) {
    throw Error(ErrorCode::kInvalidArgument, "margin must lie in (0, 1/4)");
  }
  return symmetric_2x2(0.25 - margin, 0.25 + margin, "violating-2x2");
}

Dgp affiliated_density_dgp(int k, int bidders, double beta) {
  const GridSpec grid = GridSpec::equispaced(k, bidders);
  CellArray heights = discretize_density(positive_dependence_density(bidders, beta), grid);
  CellArray masses = mass_from_height(heights);
  const double total = masses.total();
  for (double& v : masses.values()) v /= total;
  return {std::move(masses), k == 3 && bidders == 2 ? "affiliated-3x3" : "affiliated-density"};
}

std::vector<Dgp> builtin_dgps() {
  return {uniform_dgp(2, 2), independent_skewed_dgp(3, 2), affiliated_2x2(0.2),
          violating_2x2(0.1), affiliated_density_dgp(3, 2)};
}

Dgp make_dgp(const std::string& name, int k, int bidders, std::optional<double> param) {
  auto need_2x2 = [&] {
    if (k != 2 || bidders != 2) {
      throw Error(ErrorCode::kConfig, name + " is defined for k = 2 and N = 2 only");
    }
  };
  if (name == "uniform") return uniform_dgp(k, bidders);
  if (name == "independent-skewed") return independent_skewed_dgp(k, bidders, param.value_or(0.6));
  if (name == "affiliated-2x2") {
    need_2x2();
    return affiliated_2x2(param.value_or(0.2));
  }
  if (name == "violating-2x2") {
    need_2x2();
    return violating_2x2(param.value_or(0.1));
  }
  if (name == "affiliated-3x3") {
    if (k != 3 || bidders != 2) throw Error(ErrorCode::kConfig, "affiliated-3x3 needs k = 3, N = 2");
    return affiliated_density_dgp(3, 2, param.value_or(2.0));
  }
  if (name == "affiliated-density") return affiliated_density_dgp(k, bidders, param.value_or(2.0));
  throw Error(ErrorCode::kConfig, "unknown DGP '" + name + "'");
}

McResult mc_study(const Dgp& dgp, const McOptions& opts) {
  if (opts.replications < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one replication");
  if (opts.sample_size < 1) throw Error(ErrorCode::kInvalidArgument, "sample size must be positive");
  const GridSpec grid = opts.analysis_grid.value_or(dgp.masses.grid());
  if (grid.bidders() != dgp.masses.grid().bidders()) {
    throw Error(ErrorCode::kDimensionMismatch, "analysis grid and DGP disagree on N");
  }

  McResult res;
  res.replications = opts.replications;
  res.seed = opts.seed;
  res.sample_size = opts.sample_size;
  res.label = dgp.label;
  res.sizes = opts.test.sizes;
  res.rows.resize(static_cast<std::size_t>(opts.replications));

  auto run_one = [&](int r) {
    McReplication row;
    row.seed = stream_seed(opts.seed, static_cast<std::uint64_t>(r));
    const auto tuples = sample(dgp, opts.sample_size, row.seed);
    const CellArray counts = count_cells(tuples, grid);
    TestOptions topts = opts.test;
    topts.seed = mix64(row.seed);
    topts.threads = 1;
    const TestReport rep = run_test(counts, topts);
    row.lr_stat = rep.lr_stat;
    row.pvalue = rep.pvalue;
    row.decisions = rep.decision;
    res.rows[static_cast<std::size_t>(r)] = std::move(row);
  };

  const int threads = std::max(1, std::min(opts.threads, opts.replications));
  if (threads == 1) {
    for (int r = 0; r < opts.replications; ++r) run_one(r);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int r = w; r < opts.replications; r += threads) run_one(r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const std::size_t n_sizes = res.sizes.size();
  res.rate_pvalue.assign(n_sizes, 0.0);
  res.rate_kp_lower.assign(n_sizes, 0.0);
  res.rate_kp_upper.assign(n_sizes, 0.0);
  std::vector<double> stats;
  for (const auto& row : res.rows) {
    stats.push_back(row.lr_stat);
    for (std::size_t s = 0; s < n_sizes; ++s) {
      res.rate_pvalue[s] += row.pvalue < res.sizes[s] ? 1.0 : 0.0;
      res.rate_kp_lower[s] += row.decisions[s] != Decision::kFailToReject ? 1.0 : 0.0;
      res.rate_kp_upper[s] += row.decisions[s] == Decision::kReject ? 1.0 : 0.0;
    }
  }
  const double r = static_cast<double>(opts.replications);
  for (std::size_t s = 0; s < n_sizes; ++s) {
    res.rate_pvalue[s] = opts.test.compute_weights ? res.rate_pvalue[s] / r
                                                   : std::numeric_limits<double>::quiet_NaN();
    res.rate_kp_lower[s] /= r;
    res.rate_kp_upper[s] /= r;
  }
  res.mean_lr = std::accumulate(stats.begin(), stats.end(), 0.0) / r;
  std::sort(stats.begin(), stats.end());
  const std::size_t mid = stats.size() / 2;
  res.median_lr = stats.size() % 2 ? stats[mid] : 0.5 * (stats[mid - 1] + stats[mid]);
  return res;
}

namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string to_json(const McResult& res) {
  using nlohmann::json;
  json j;
  j["label"] = res.label;
  j["replications"] = res.replications;
  j["seed"] = res.seed;
  j["t"] = res.sample_size;
  j["sizes"] = res.sizes;
  json pv = json::array();
  for (double v : res.rate_pvalue) pv.push_back(number_or_null(v));
  j["rate_pvalue"] = pv;
  j["rate_kp_lower"] = res.rate_kp_lower;
  j["rate_kp_upper"] = res.rate_kp_upper;
  j["mean_lr_stat"] = res.mean_lr;
  j["median_lr_stat"] = res.median_lr;
  return j.dump(2);
}

void write_csv(std::ostream& os, const McResult& res) {
  os << "replication,seed,lr_stat,pvalue";
  for (double s : res.sizes) os << ",decision_" << s;
  os << '\n';
  os.precision(17);
  for (std::size_t r = 0; r < res.rows.size(); ++r) {
    const auto& row = res.rows[r];
    os << r << ',' << row.seed << ',' << row.lr_stat << ',';
    if (std::isfinite(row.pvalue)) os << row.pvalue;
    for (Decision d : row.decisions) os << ',' << to_string(d);
    os << '\n';
  }
}

}  // namespace affiltest
