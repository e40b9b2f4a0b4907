#include "affiltest/hetero.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <tuple>

namespace affiltest {

std::string_view to_string(RegressionMethod m) {
  switch (m) {
    case RegressionMethod::kLs: return "ls";
    case RegressionMethod::kLad: return "lad";
    case RegressionMethod::kKernel: return "kernel";
  }
  return "unknown";
}

RegressionMethod parse_regression_method(std::string_view text) {
  if (text == "ls") return RegressionMethod::kLs;
  if (text == "lad") return RegressionMethod::kLad;
  if (text == "kernel") return RegressionMethod::kKernel;
  throw Error(ErrorCode::kConfig, "unknown regression method '" + std::string(text) + "'");
}

namespace {

void check_xy(std::span<const double> x, std::span<const double> y, std::size_t min_points) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "x and y have different lengths");
  }
  if (x.size() < min_points) {
    throw Error(ErrorCode::kInvalidArgument,
                "need at least " + std::to_string(min_points) + " points");
  }
}

// Weighted least-squares line. Throws kRankDeficient for constant x.
std::pair<double, double> weighted_line(std::span<const double> x, std::span<const double> y,
                                        std::span<const double> w) {
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  const double scale = std::max(1.0, mx * mx) * sw;
  if (!(sxx > 1e-14 * scale)) {
    throw Error(ErrorCode::kRankDeficient, "regressor has no variation");
  }
  const double slope = sxy / sxx;
  return {my - slope * mx, slope};
}

}  // namespace

double RegressionFit::operator()(double at) const {
  if (method != RegressionMethod::kKernel) return intercept + slope * at;
  const double span = x_max - x_min;
  if (at < x_min - 1e-12 * (1 + span) || at > x_max + 1e-12 * (1 + span)) {
    throw Error(ErrorCode::kOutOfRange, "kernel fit evaluated outside the observed range");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double xi : x) top = std::max(top, -0.5 * std::pow((at - xi) / bandwidth, 2));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = std::exp(-0.5 * std::pow((at - x[i]) / bandwidth, 2) - top);
    num += w * y[i];
    den += w;
  }
  return num / den;
}

RegressionFit fit_ls(std::span<const double> x, std::span<const double> y) {
  check_xy(x, y, 2);
  const std::vector<double> ones(x.size(), 1.0);
  RegressionFit f;
  f.method = RegressionMethod::kLs;
  std::tie(f.intercept, f.slope) = weighted_line(x, y, ones);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    ss_tot += std::pow(y[i] - my, 2);
  }
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  f.x_min = *std::min_element(x.begin(), x.end());
  f.x_max = *std::max_element(x.begin(), x.end());
  return f;
}

namespace {

// True when the line through data points i and j satisfies the subgradient
// optimality condition of sum |y - a - b x|.
bool lad_optimal(std::span<const double> x, std::span<const double> y, std::size_t i,
                 std::size_t j) {
  const double slope = (y[j] - y[i]) / (x[j] - x[i]);
  const double intercept = y[i] - slope * x[i];
  double g0 = 0.0, g1 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (k == i || k == j) continue;
    const double r = y[k] - intercept - slope * x[k];
    if (r == 0.0) continue;  // a third point on the line contributes u in [-1, 1]
    const double sg = r > 0 ? 1.0 : -1.0;
    g0 += sg;
    g1 += sg * x[k];
  }
  // u_i (1, x_i) + u_j (1, x_j) = (g0, g1) with |u| <= 1.
  const double uj = (g1 - g0 * x[i]) / (x[j] - x[i]);
  const double ui = g0 - uj;
  constexpr double slack = 1.0 + 1e-12;
  return std::abs(ui) <= slack && std::abs(uj) <= slack;
}

// Descent over lines through pairs of data points: with the line pinned at
// point `pivot`, the best slope is a weighted median of the slopes to the
// other points. Returns the final pair.
std::optional<std::pair<std::size_t, std::size_t>> lad_descent(std::span<const double> x,
                                                               std::span<const double> y,
                                                               std::size_t pivot) {
  const std::size_t n = x.size();
  std::vector<std::pair<double, double>> sw;  // slope, weight
  std::vector<std::size_t> who;
  std::size_t prev = n;
  for (std::size_t step = 0; step < 4 * n + 10; ++step) {
    sw.clear();
    who.clear();
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (x[k] == x[pivot]) continue;
      sw.emplace_back((y[k] - y[pivot]) / (x[k] - x[pivot]), std::abs(x[k] - x[pivot]));
      who.push_back(k);
      total += sw.back().second;
    }
    if (sw.empty()) return std::nullopt;
    std::vector<std::size_t> order(sw.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sw[a].first < sw[b].first; });
    double acc = 0.0;
    std::size_t med = order.back();
    for (std::size_t o : order) {
      acc += sw[o].second;
      if (acc >= total / 2) {
        med = o;
        break;
      }
    }
    const std::size_t next = who[med];
    if (next == prev) return std::pair{pivot, next};
    prev = pivot;
    pivot = next;
  }
  return std::nullopt;
}

}  // namespace

RegressionFit fit_lad(std::span<const double> x, std::span<const double> y,
                      const LadOptions& opts) {
  RegressionFit f = fit_ls(x, y);
  f.method = RegressionMethod::kLad;
  f.r_squared = 0.0;
  std::vector<double> w(x.size());
  const double eps2 = opts.smoothing * opts.smoothing;
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      w[i] = 1.0 / std::sqrt(r * r + eps2);
    }
    const auto [a, b] = weighted_line(x, y, w);
    const double change = std::max(std::abs(a - f.intercept), std::abs(b - f.slope));
    f.intercept = a;
    f.slope = b;
    f.iterations = it;
    if (change < opts.tol) return f;
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      if (std::abs(y[i] - a - b * x[i]) < std::abs(y[nearest] - a - b * x[nearest])) nearest = i;
    }
    if (const auto pair = lad_descent(x, y, nearest)) {
      const auto [i, j] = *pair;
      if (lad_optimal(x, y, i, j)) {
        f.slope = (y[j] - y[i]) / (x[j] - x[i]);
        f.intercept = y[i] - f.slope * x[i];
        return f;
      }
    }
  }
  throw LadNonconvergence("LAD did not converge in " + std::to_string(opts.max_iter) +
                              " iterations",
                          f);
}

RegressionFit fit_kernel(std::span<const double> x, std::span<const double> y,
                         std::optional<double> bandwidth) {
  check_xy(x, y, 10);
  RegressionFit f;
  f.method = RegressionMethod::kKernel;
  f.x.assign(x.begin(), x.end());
  f.y.assign(y.begin(), y.end());
  f.x_min = *std::min_element(x.begin(), x.end());
  f.x_max = *std::max_element(x.begin(), x.end());
  if (bandwidth) {
    f.bandwidth = *bandwidth;
  } else {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    f.bandwidth = 1.06 * std::sqrt(ss / (n - 1)) * std::pow(n, -0.2);
  }
  if (!(f.bandwidth > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "kernel bandwidth must be positive");
  }
  return f;
}

RegressionFit fit(RegressionMethod method, std::span<const double> x,
                  std::span<const double> y) {
  switch (method) {
    case RegressionMethod::kLs: return fit_ls(x, y);
    case RegressionMethod::kLad: return fit_lad(x, y);
    case RegressionMethod::kKernel: return fit_kernel(x, y);
  }
  throw Error(ErrorCode::kInternal, "unknown regression method");
}

LogDesign log_design(std::span<const AuctionRecord> records) {
  LogDesign d;
  for (const auto& r : records) {
    if (!(r.engineer_estimate > 0.0)) {
      throw Error(ErrorCode::kValidation, "nonpositive engineer's estimate in auction " + r.auction_id);
    }
    for (double b : r.bids) {
      if (!(b > 0.0)) throw Error(ErrorCode::kValidation, "nonpositive bid in auction " + r.auction_id);
      d.x.push_back(std::log(r.engineer_estimate));
      d.y.push_back(std::log(b));
    }
  }
  return d;
}

std::vector<std::vector<double>> raw_residuals(const RegressionFit& fit,
                                               std::span<const AuctionRecord> records) {
  std::vector<std::vector<double>> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const double psi = fit(std::log(r.engineer_estimate));
    std::vector<double> u;
    u.reserve(r.bids.size());
    for (double b : r.bids) u.push_back(std::log(b) - psi);
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Tuple> residual_tuples(const RegressionFit& fit,
                                   std::span<const AuctionRecord> records) {
  const auto raw = raw_residuals(fit, records);
  std::vector<double> flat;
  for (const auto& u : raw) flat.insert(flat.end(), u.begin(), u.end());
  const std::vector<double> z = normalize(flat);
  std::vector<Tuple> out;
  out.reserve(raw.size());
  std::size_t pos = 0;
  for (const auto& u : raw) {
    out.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(pos),
                     z.begin() + static_cast<std::ptrdiff_t>(pos + u.size()));
    pos += u.size();
  }
  return out;
}

void write_scatter_csv(std::ostream& os, std::span<const AuctionRecord> records) {
  os << "auction_id,log_estimate,log_bid\n" << std::setprecision(17);
  for (const auto& r : records) {
    for (double b : r.bids) {
      os << r.auction_id << ',' << std::log(r.engineer_estimate) << ',' << std::log(b) << '\n';
    }
  }
}

void write_curves_csv(std::ostream& os, std::span<const RegressionFit> fits, double x_min,
                      double x_max, int points) {
  os << "log_estimate";
  for (const auto& f : fits) os << ',' << to_string(f.method);
  os << '\n' << std::setprecision(17);
  for (int p = 0; p < points; ++p) {
    const double x =
        points == 1 ? x_min : x_min + (x_max - x_min) * static_cast<double>(p) / (points - 1);
    os << x;
    for (const auto& f : fits) os << ',' << f(x);
    os << '\n';
  }
}

void write_residuals_csv(std::ostream& os, std::span<const AuctionRecord> records,
                         std::span<const Tuple> tuples) {
  const std::size_t n = tuples.empty() ? 0 : tuples.front().size();
  os << "auction_id";
  for (std::size_t b = 1; b <= n; ++b) os << ",u" << b;
  os << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    os << records[t].auction_id;
    for (double u : tuples[t]) os << ',' << u;
    os << '\n';
  }
}

}  // namespace affiltest
