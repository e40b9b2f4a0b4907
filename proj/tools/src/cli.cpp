#include "affiltest_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "affiltest/error.hpp"
#include "affiltest/random.hpp"

#ifndef AFFILTEST_VERSION
#define AFFILTEST_VERSION "0.0.0"
#endif

namespace affiltest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view version() { return AFFILTEST_VERSION; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(line) + ": cannot parse " + what +
                                        " '" + std::string(field) + "'");
  }
  return v;
}

std::string fmt(double v, int precision = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

template <class F>
void write_with(const fs::path& path, F&& body) {
  std::ostringstream os;
  body(os);
  write_file(path, os.str());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

BidTable ingest(std::istream& in, int bidders, std::ostream* log) {
  BidTable table;
  std::map<std::string, std::size_t> position;
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = trim(raw);
    if (line == 1 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    if (text.empty()) continue;
    if (!header) {
      if (text != "auction_id,bid,engineer_estimate") {
        throw Error(ErrorCode::kFormat, "line " + std::to_string(line) +
                                            ": expected header auction_id,bid,engineer_estimate");
      }
      header = true;
      continue;
    }
    const auto c1 = text.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(',', c1 + 1);
    if (c2 == std::string_view::npos || text.find(',', c2 + 1) != std::string_view::npos) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line) + ": expected 3 fields");
    }
    const std::string id(trim(text.substr(0, c1)));
    if (id.empty()) throw Error(ErrorCode::kFormat, "line " + std::to_string(line) + ": empty auction_id");
    const double bid = parse_number(text.substr(c1 + 1, c2 - c1 - 1), line, "bid");
    const double estimate = parse_number(text.substr(c2 + 1), line, "engineer_estimate");
    if (!(bid > 0.0) || !(estimate > 0.0) || !std::isfinite(bid) || !std::isfinite(estimate)) {
      throw Error(ErrorCode::kValidation, "line " + std::to_string(line) + ": prices must be positive");
    }
    auto [it, fresh] = position.try_emplace(id, table.auctions.size());
    if (fresh) table.auctions.push_back({id, estimate, {}});
    AuctionRecord& rec = table.auctions[it->second];
    if (rec.engineer_estimate != estimate) {
      throw Error(ErrorCode::kValidation, "line " + std::to_string(line) + ": auction " + id +
                                              " has conflicting engineer's estimates");
    }
    rec.bids.push_back(bid);
    ++table.rows;
  }
  if (!header) throw Error(ErrorCode::kFormat, "empty input: missing header");
  if (bidders > 0) {
    const auto keep = std::stable_partition(
        table.auctions.begin(), table.auctions.end(),
        [&](const AuctionRecord& r) { return r.bids.size() == static_cast<std::size_t>(bidders); });
    table.dropped = static_cast<std::size_t>(table.auctions.end() - keep);
    table.auctions.erase(keep, table.auctions.end());
  }
  if (log) {
    *log << "ingest: " << table.rows << " rows, " << table.auctions.size() << " auctions kept";
    if (bidders > 0) *log << ", " << table.dropped << " dropped (bid count != " << bidders << ")";
    *log << '\n';
  }
  return table;
}

BidTable ingest(const fs::path& path, int bidders, std::ostream* log) {
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "input file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open input file: " + path.string());
  return ingest(in, bidders, log);
}

void write_bids_csv(std::ostream& os, std::span<const AuctionRecord> auctions) {
  os << "auction_id,bid,engineer_estimate\n" << std::setprecision(17);
  for (const auto& a : auctions) {
    for (double b : a.bids) os << a.auction_id << ',' << b << ',' << a.engineer_estimate << '\n';
  }
}

Stats describe(std::vector<double> v) {
  Stats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  s.min = v.front();
  s.max = v.back();
  return s;
}

Summary summarize(std::span<const AuctionRecord> auctions) {
  std::vector<double> est, win, all;
  for (const auto& a : auctions) {
    if (a.bids.empty()) continue;
    est.push_back(a.engineer_estimate);
    win.push_back(*std::min_element(a.bids.begin(), a.bids.end()));
    all.insert(all.end(), a.bids.begin(), a.bids.end());
  }
  return {est.size(), describe(est), describe(win), describe(all)};
}

std::string format_summary(const Summary& s) {
  std::ostringstream os;
  os << "auctions: " << s.auctions << "\n";
  os << std::left << std::setw(22) << "" << std::right << std::setw(8) << "count" << std::setw(16)
     << "mean" << std::setw(16) << "sd" << std::setw(16) << "median" << std::setw(16) << "min"
     << std::setw(16) << "max" << "\n";
  auto row = [&](const char* name, const Stats& st) {
    os << std::left << std::setw(22) << name << std::right << std::setw(8) << st.count
       << std::setw(16) << fmt(st.mean) << std::setw(16) << fmt(st.sd) << std::setw(16)
       << fmt(st.median) << std::setw(16) << fmt(st.min) << std::setw(16) << fmt(st.max) << "\n";
  };
  row("engineer's estimate", s.estimate);
  row("winning bid", s.winning_bid);
  row("all bids", s.bids);
  return os.str();
}

GridSpec Config::grid() const {
  return breakpoints.empty() ? GridSpec::equispaced(intervals, bidders)
                             : GridSpec(breakpoints, bidders);
}

TestOptions Config::test_options() const {
  TestOptions t;
  t.solver.tol = tol;
  t.solver.max_iter = max_iter;
  t.solver.epsilon_floor = epsilon_floor;
  t.solver.constraint_mode = constraint_mode;
  t.draws = draws;
  t.seed = seed;
  t.sizes = sizes;
  t.threads = threads;
  t.compute_weights = compute_weights;
  return t;
}

void Config::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  if (bidders < 2) fail("bidders must be at least 2");
  if (breakpoints.empty() && intervals < 1) fail("intervals must be at least 1");
  if (!breakpoints.empty()) {
    try {
      (void)grid();
    } catch (const Error& e) {
      fail(std::string("invalid breakpoints: ") + e.what());
    }
  }
  if (sizes.empty()) fail("at least one test size is required");
  for (double s : sizes) {
    if (!(s > 0.0 && s < 1.0)) fail("test size " + fmt(s, 4) + " is outside (0, 1)");
  }
  if (!(tol > 0.0)) fail("tol must be positive");
  if (max_iter < 1) fail("max_iter must be positive");
  if (!(epsilon_floor > 0.0 && epsilon_floor < 1e-3)) fail("epsilon_floor must lie in (0, 1e-3)");
  if (draws < 1) fail("draws must be positive");
  if (threads < 1) fail("threads must be positive");
  if (dgp_intervals < 1) fail("dgp_intervals must be positive");
  if (sample_size < 1) fail("sample_size must be positive");
  if (replications < 1) fail("replications must be positive");
  if (output_dir.empty()) fail("output_dir is empty");
}

Config config_from_json(std::string_view text) {
  Config c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "input") c.input = v.get<std::string>();
      else if (key == "bidders") c.bidders = v.get<int>();
      else if (key == "intervals") c.intervals = v.get<int>();
      else if (key == "breakpoints") c.breakpoints = v.get<std::vector<double>>();
      else if (key == "method") c.method = parse_regression_method(v.get<std::string>());
      else if (key == "constraint_mode") c.constraint_mode = parse_constraint_mode(v.get<std::string>());
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "max_iter") c.max_iter = v.get<int>();
      else if (key == "epsilon_floor") c.epsilon_floor = v.get<double>();
      else if (key == "draws") c.draws = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "sizes") c.sizes = v.get<std::vector<double>>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "dgp") c.dgp = v.get<std::string>();
      else if (key == "dgp_param") c.dgp_param = v.is_null() ? std::nullopt : std::optional(v.get<double>());
      else if (key == "dgp_intervals") c.dgp_intervals = v.get<int>();
      else if (key == "sample_size") c.sample_size = v.get<std::size_t>();
      else if (key == "replications") c.replications = v.get<int>();
      else if (key == "compute_weights") c.compute_weights = v.get<bool>();
      else throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  return c;
}

Config load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kConfig, "config file not found: " + path.string());
  return config_from_json(read_file(path));
}

std::string to_json(const Config& c) {
  json j;
  j["input"] = c.input;
  j["bidders"] = c.bidders;
  j["intervals"] = c.intervals;
  j["breakpoints"] = c.breakpoints;
  j["method"] = std::string(to_string(c.method));
  j["constraint_mode"] = std::string(to_string(c.constraint_mode));
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["epsilon_floor"] = c.epsilon_floor;
  j["draws"] = c.draws;
  j["seed"] = c.seed;
  j["sizes"] = c.sizes;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["dgp"] = c.dgp;
  j["dgp_param"] = c.dgp_param ? json(*c.dgp_param) : json(nullptr);
  j["dgp_intervals"] = c.dgp_intervals;
  j["sample_size"] = c.sample_size;
  j["replications"] = c.replications;
  j["compute_weights"] = c.compute_weights;
  return j.dump();
}

std::vector<AuctionRecord> synthesize_auctions(const Dgp& dgp, std::size_t auctions,
                                               std::uint64_t seed) {
  const std::vector<Tuple> u = sample(dgp, auctions, seed);
  SplitMix64 gen(stream_seed(seed, 0xE57));
  std::uniform_real_distribution<double> log_p(9.0, 14.0);
  std::vector<AuctionRecord> out;
  out.reserve(auctions);
  for (std::size_t t = 0; t < u.size(); ++t) {
    const double lp = log_p(gen);
    AuctionRecord rec{"A" + std::to_string(t + 1), std::exp(lp), {}};
    for (double v : u[t]) rec.bids.push_back(std::exp(-0.3 + 1.02 * lp + 0.5 * (v - 0.5)));
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

void log_header(std::ostream& log, const char* command, const Config& c) {
  log << "affiltest " << version() << " " << command << "\n";
  log << "config: " << to_json(c) << "\n";
  log << "seed: " << c.seed << "\n";
}

}  // namespace

TestRun cmd_test(const Config& c, std::ostream& log) {
  c.validate();
  log_header(log, "test-affiliation", c);
  if (c.input.empty()) throw Error(ErrorCode::kConfig, "no input file given");
  BidTable table = ingest(fs::path(c.input), c.bidders, &log);
  if (table.auctions.empty()) {
    throw Error(ErrorCode::kEmptySample, "no auctions with " + std::to_string(c.bidders) + " bids");
  }
  const LogDesign design = log_design(table.auctions);
  RegressionFit main_fit = fit(c.method, design.x, design.y);
  log << "regression (" << to_string(c.method) << ")";
  if (c.method != RegressionMethod::kKernel) {
    log << ": intercept " << main_fit.intercept << ", slope " << main_fit.slope;
  } else {
    log << ": bandwidth " << main_fit.bandwidth;
  }
  log << "\n";
  const std::vector<Tuple> tuples = residual_tuples(main_fit, table.auctions);
  const GridSpec grid = c.grid();
  CellArray counts = count_cells(tuples, grid);
  TestReport report = run_test(counts, c.test_options());
  log << "J: " << report.j << "\n";
  log << "constraint mode: " << to_string(report.constraint_mode) << "\n";
  log << "lr_stat: " << report.lr_stat << "\n";
  for (std::size_t s = 0; s < report.sizes.size(); ++s) {
    log << "decision at " << report.sizes[s] << ": " << to_string(report.decision[s]) << "\n";
  }

  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
  write_file(dir / "report.json", to_json(report) + "\n");
  std::ostringstream summary;
  summary << "affiltest " << version() << "\n"
          << "input: " << c.input << " (" << table.auctions.size() << " auctions with "
          << c.bidders << " bids, " << table.dropped << " dropped)\n"
          << "regression: " << to_string(c.method) << "\n\n"
          << text_summary(report);
  write_file(dir / "summary.txt", summary.str());
  write_with(dir / "scatter.csv", [&](std::ostream& os) { write_scatter_csv(os, table.auctions); });
  std::vector<RegressionFit> fits{fit_ls(design.x, design.y), fit_lad(design.x, design.y)};
  if (design.x.size() >= 10) fits.push_back(fit_kernel(design.x, design.y));
  const auto [lo, hi] = std::minmax_element(design.x.begin(), design.x.end());
  write_with(dir / "curves.csv",
             [&](std::ostream& os) { write_curves_csv(os, fits, *lo, *hi, 200); });
  write_with(dir / "residuals.csv",
             [&](std::ostream& os) { write_residuals_csv(os, table.auctions, tuples); });
  log << "wrote " << (dir / "report.json").string() << "\n";
  return {std::move(table), std::move(main_fit), std::move(counts), std::move(report)};
}

McResult cmd_simulate(const Config& c, std::ostream& log) {
  c.validate();
  log_header(log, "simulate", c);
  const Dgp dgp = make_dgp(c.dgp, c.dgp_intervals, c.bidders, c.dgp_param);
  McOptions opts;
  opts.sample_size = c.sample_size;
  opts.replications = c.replications;
  opts.seed = c.seed;
  opts.threads = c.threads;
  opts.test = c.test_options();
  const GridSpec grid = c.grid();
  if (!(grid == dgp.masses.grid())) opts.analysis_grid = grid;
  log << "J: " << generate(grid.intervals(), grid.bidders(), c.constraint_mode, true).size() << "\n";
  log << "constraint mode: " << to_string(c.constraint_mode) << "\n";
  log << "dgp: " << dgp.label << "\n";
  McResult res = mc_study(dgp, opts);
  for (std::size_t s = 0; s < res.sizes.size(); ++s) {
    log << "size " << res.sizes[s] << ": reject(pvalue) " << res.rate_pvalue[s]
        << ", reject(kp_lower) " << res.rate_kp_lower[s] << ", reject(kp_upper) "
        << res.rate_kp_upper[s] << "\n";
  }
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
  write_file(dir / "mc.json", to_json(res) + "\n");
  write_with(dir / "mc.csv", [&](std::ostream& os) { write_csv(os, res); });
  return res;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kIo:
    case ErrorCode::kFormat:
    case ErrorCode::kValidation:
      return 2;
    default:
      return 1;
  }
}

namespace {

// Flag overrides shared by test-affiliation and simulate.
struct Overrides {
  std::optional<std::string> config, input, output_dir, method, mode, dgp;
  std::optional<int> bidders, intervals, draws, threads, max_iter, replications, dgp_intervals;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sample_size;
  std::optional<double> tol, epsilon_floor, dgp_param;
  std::vector<double> breakpoints, sizes;
  bool no_weights = false;

  void attach(CLI::App* app, bool simulation) {
    app->add_option("-c,--config", config, "JSON config file");
    app->add_option("-N,--bidders", bidders, "bidders per auction");
    app->add_option("-k,--intervals", intervals, "equispaced intervals per axis");
    app->add_option("--breakpoints", breakpoints, "full breakpoint list 0 r_1 ... 1 (overrides -k)");
    app->add_option("--mode", mode, "constraint set: adjacent or full");
    app->add_option("--draws", draws, "Monte Carlo draws for the chi-bar weights");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--sizes", sizes, "test sizes");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--tol", tol, "solver tolerance");
    app->add_option("--max-iter", max_iter, "solver Newton iteration cap");
    app->add_option("--epsilon-floor", epsilon_floor, "solver mass floor");
    app->add_option("-o,--out", output_dir, "output directory");
    if (simulation) {
      app->add_option("--dgp", dgp, "uniform, independent-skewed, affiliated-2x2, violating-2x2, "
                                    "affiliated-3x3 or affiliated-density");
      app->add_option("--dgp-param", dgp_param, "DGP parameter (rho, margin, ratio or beta)");
      app->add_option("--dgp-intervals", dgp_intervals, "intervals of the DGP grid");
      app->add_option("-T,--sample-size", sample_size, "auctions per replication");
      app->add_option("-R,--replications", replications, "replications");
      app->add_flag("--no-weights", no_weights, "skip chi-bar weights (Kodde-Palm rules only)");
    } else {
      app->add_option("-i,--input", input, "bid CSV");
      app->add_option("--method", method, "regression: ls, lad or kernel");
    }
  }

  Config resolve() const {
    Config c = config ? load_config(*config) : Config{};
    if (input) c.input = *input;
    if (output_dir) c.output_dir = *output_dir;
    if (method) c.method = parse_regression_method(*method);
    if (mode) c.constraint_mode = parse_constraint_mode(*mode);
    if (dgp) c.dgp = *dgp;
    if (bidders) c.bidders = *bidders;
    if (intervals) {
      c.intervals = *intervals;
      c.breakpoints.clear();
    }
    if (!breakpoints.empty()) c.breakpoints = breakpoints;
    if (draws) c.draws = *draws;
    if (threads) c.threads = *threads;
    if (max_iter) c.max_iter = *max_iter;
    if (replications) c.replications = *replications;
    if (dgp_intervals) c.dgp_intervals = *dgp_intervals;
    if (seed) c.seed = *seed;
    if (sample_size) c.sample_size = *sample_size;
    if (tol) c.tol = *tol;
    if (epsilon_floor) c.epsilon_floor = *epsilon_floor;
    if (dgp_param) c.dgp_param = *dgp_param;
    if (!sizes.empty()) c.sizes = sizes;
    if (no_weights) c.compute_weights = false;
    c.validate();
    return c;
  }
};

// Runs `body` with a log that is mirrored to `err` and saved as run.log in
// the output directory, also on failure.
template <class F>
void with_run_log(const Config& c, std::ostream& err, F&& body) {
  std::ostringstream log;
  auto save = [&] {
    err << log.str();
    std::error_code ec;
    fs::create_directories(c.output_dir, ec);
    std::ofstream(fs::path(c.output_dir) / "run.log") << log.str();
  };
  try {
    body(log);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    save();
    throw;
  }
  save();
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kFormat, "matrix must be a nonempty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw Error(ErrorCode::kFormat, "matrix must be square");
    }
    for (Eigen::Index col = 0; col < n; ++col) m(r, col) = row[static_cast<std::size_t>(col)].get<double>();
  }
  if (!m.isApprox(m.transpose(), 1e-12)) throw Error(ErrorCode::kValidation, "matrix is not symmetric");
  return m;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonparametric test of affiliation in auction bid data"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  std::string input;
  int bidders = 0;
  auto* summary = app.add_subcommand("summary", "descriptive statistics of a bid file");
  summary->add_option("-i,--input", input, "bid CSV")->required();
  summary->add_option("-N,--bidders", bidders, "keep auctions with exactly N bids (0 keeps all)");

  std::string method = "ls";
  std::optional<std::string> hetero_out;
  auto* hetero = app.add_subcommand("fit-hetero", "regress log bids on log engineer's estimates");
  hetero->add_option("-i,--input", input, "bid CSV")->required();
  hetero->add_option("-N,--bidders", bidders, "keep auctions with exactly N bids (0 keeps all)");
  hetero->add_option("--method", method, "method used for the residual tuples: ls, lad or kernel");
  hetero->add_option("-o,--out", hetero_out, "directory for scatter, curve and residual CSVs");

  Overrides test_flags;
  auto* test = app.add_subcommand("test-affiliation", "run the affiliation test on a bid file");
  test_flags.attach(test, false);

  Overrides sim_flags;
  std::optional<std::string> emit_bids;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo size and power study");
  sim_flags.attach(simulate, true);
  simulate->add_option("--emit-bids", emit_bids,
                       "write one synthetic bid CSV of sample-size auctions instead");

  int identity = 0;
  std::optional<std::string> matrix;
  int draws = 100000, threads = 1;
  std::uint64_t seed = 20100101;
  std::optional<double> stat;
  auto* weights = app.add_subcommand("weights", "chi-bar-squared weights for a covariance matrix");
  auto* id_opt = weights->add_option("--identity", identity, "use the J x J identity");
  auto* mat_opt = weights->add_option("--matrix", matrix, "JSON file holding a square matrix");
  id_opt->excludes(mat_opt);
  weights->add_option("--draws", draws, "Monte Carlo draws");
  weights->add_option("--seed", seed, "seed");
  weights->add_option("--threads", threads, "worker threads");
  weights->add_option("--stat", stat, "also print the p-value of this LR statistic");

  int k = 2, n = 2;
  std::string mode = "adjacent";
  bool cells = false;
  auto* constraints = app.add_subcommand("constraints", "dump a TP2 constraint set");
  constraints->add_option("-k,--intervals", k, "intervals per axis");
  constraints->add_option("-N,--bidders", n, "bidders");
  constraints->add_option("--mode", mode, "adjacent or full");
  constraints->add_flag("--cells", cells, "one row per cell-level constraint (no symmetry)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (summary->parsed()) {
      const BidTable t = ingest(fs::path(input), bidders, &err);
      out << format_summary(summarize(t.auctions));
    } else if (hetero->parsed()) {
      const BidTable t = ingest(fs::path(input), bidders, &err);
      const LogDesign d = log_design(t.auctions);
      json j;
      const RegressionFit ls = fit_ls(d.x, d.y);
      const RegressionFit lad = fit_lad(d.x, d.y);
      j["ls"] = {{"intercept", ls.intercept}, {"slope", ls.slope}, {"r_squared", ls.r_squared}};
      j["lad"] = {{"intercept", lad.intercept}, {"slope", lad.slope}, {"iterations", lad.iterations}};
      std::vector<RegressionFit> fits{ls, lad};
      if (d.x.size() >= 10) {
        fits.push_back(fit_kernel(d.x, d.y));
        j["kernel"] = {{"bandwidth", fits.back().bandwidth}};
      }
      j["observations"] = d.x.size();
      out << j.dump(2) << "\n";
      if (hetero_out) {
        const fs::path dir(*hetero_out);
        fs::create_directories(dir);
        const RegressionFit chosen = fit(parse_regression_method(method), d.x, d.y);
        const auto tuples = residual_tuples(chosen, t.auctions);
        const auto [lo, hi] = std::minmax_element(d.x.begin(), d.x.end());
        write_with(dir / "scatter.csv", [&](std::ostream& os) { write_scatter_csv(os, t.auctions); });
        write_with(dir / "curves.csv", [&](std::ostream& os) { write_curves_csv(os, fits, *lo, *hi, 200); });
        write_with(dir / "residuals.csv",
                   [&](std::ostream& os) { write_residuals_csv(os, t.auctions, tuples); });
      }
    } else if (test->parsed()) {
      const Config c = test_flags.resolve();
      with_run_log(c, err, [&](std::ostream& log) {
        const TestRun r = cmd_test(c, log);
        out << text_summary(r.report);
      });
    } else if (simulate->parsed()) {
      const Config c = sim_flags.resolve();
      if (emit_bids) {
        const Dgp dgp = make_dgp(c.dgp, c.dgp_intervals, c.bidders, c.dgp_param);
        std::ofstream os(*emit_bids, std::ios::binary);
        if (!os) throw Error(ErrorCode::kIo, "cannot write " + *emit_bids);
        write_bids_csv(os, synthesize_auctions(dgp, c.sample_size, c.seed));
        return 0;
      }
      with_run_log(c, err, [&](std::ostream& log) {
        const McResult r = cmd_simulate(c, log);
        out << "replications " << r.replications << ", T " << r.sample_size << ", dgp " << r.label
            << "\n";
        for (std::size_t s = 0; s < r.sizes.size(); ++s) {
          out << "size " << r.sizes[s] << ": pvalue " << r.rate_pvalue[s] << ", kp_lower "
              << r.rate_kp_lower[s] << ", kp_upper " << r.rate_kp_upper[s] << "\n";
        }
      });
    } else if (weights->parsed()) {
      if (!identity && !matrix) throw Error(ErrorCode::kConfig, "give --identity J or --matrix FILE");
      if (draws < 1 || threads < 1) throw Error(ErrorCode::kConfig, "draws and threads must be positive");
      const Eigen::MatrixXd p = matrix ? read_matrix(*matrix)
                                       : Eigen::MatrixXd::Identity(identity, identity).eval();
      const ChiBarWeights w = chibar_weights(p, draws, seed, threads);
      json j;
      j["weights"] = w.omega;
      j["regularized"] = w.regularized;
      j["draws"] = draws;
      j["seed"] = seed;
      if (stat) j["pvalue"] = chibar_pvalue(*stat, w.omega);
      out << j.dump(2) << "\n";
    } else if (constraints->parsed()) {
      write_constraints(out, generate(k, n, parse_constraint_mode(mode), !cells));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace affiltest::cli
