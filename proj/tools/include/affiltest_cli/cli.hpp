#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affiltest/hetero.hpp"
#include "affiltest/inference.hpp"
#include "affiltest/simulate.hpp"

namespace affiltest::cli {

/// Parsed bid file, one record per auction in order of first appearance.
struct BidTable {
  std::vector<AuctionRecord> auctions;
  std::size_t rows = 0;
  std::size_t dropped = 0;  // auctions removed by the bidder-count filter
};

/// Reads a CSV with header auction_id,bid,engineer_estimate. Keeps only
/// auctions with exactly `bidders` bids (all auctions when 0). Throws
/// kIo when the file cannot be opened, kFormat for a missing header or a
/// malformed row (with its line number) and kValidation for nonpositive
/// prices or conflicting estimates within an auction.
BidTable ingest(const std::filesystem::path& path, int bidders, std::ostream* log = nullptr);
BidTable ingest(std::istream& in, int bidders, std::ostream* log = nullptr);

void write_bids_csv(std::ostream& os, std::span<const AuctionRecord> auctions);

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Stats describe(std::vector<double> values);

struct Summary {
  std::size_t auctions = 0;
  Stats estimate;
  Stats winning_bid;  // lowest bid of each auction
  Stats bids;
};

Summary summarize(std::span<const AuctionRecord> auctions);
std::string format_summary(const Summary& s);

struct Config {
  std::string input;
  int bidders = 3;
  int intervals = 2;
  std::vector<double> breakpoints;  // overrides `intervals` when set
  RegressionMethod method = RegressionMethod::kLs;
  ConstraintMode constraint_mode = ConstraintMode::kAdjacent;
  double tol = 1e-8;
  int max_iter = 500;
  double epsilon_floor = 1e-10;
  int draws = 100000;
  std::uint64_t seed = 20100101;
  std::vector<double> sizes{0.10, 0.05, 0.01};
  int threads = 1;
  std::string output_dir = "out";

  // simulate
  std::string dgp = "uniform";
  std::optional<double> dgp_param;
  int dgp_intervals = 2;
  std::size_t sample_size = 500;
  int replications = 500;
  bool compute_weights = true;

  GridSpec grid() const;
  TestOptions test_options() const;

  /// Throws kConfig on any invalid field.
  void validate() const;
};

/// Config file format: one JSON object whose keys are the field names
/// above ("input", "bidders", "intervals", "breakpoints", "method",
/// "constraint_mode", "tol", "max_iter", "epsilon_floor", "draws", "seed",
/// "sizes", "threads", "output_dir", "dgp", "dgp_param", "dgp_intervals",
/// "sample_size", "replications", "compute_weights"). Unknown keys are
/// rejected.
Config config_from_json(std::string_view text);
Config load_config(const std::filesystem::path& path);
std::string to_json(const Config& c);

/// Synthetic bid file for an N-bidder DGP: log p uniform on [9, 14], and
/// log B = -0.3 + 1.02 log p + 0.5 (u - 1/2) with u drawn from the DGP.
std::vector<AuctionRecord> synthesize_auctions(const Dgp& dgp, std::size_t auctions,
                                               std::uint64_t seed);

struct TestRun {
  BidTable table;
  RegressionFit fit;
  CellArray counts;
  TestReport report;
};

/// ingest -> regression -> residual tuples -> counts -> test. Writes
/// report.json, summary.txt, scatter.csv, curves.csv and residuals.csv
/// into the output directory; progress goes to `log`.
TestRun cmd_test(const Config& config, std::ostream& log);

/// Monte Carlo study; writes mc.json and mc.csv into the output directory.
McResult cmd_simulate(const Config& config, std::ostream& log);

/// Entry point of the command-line tool. Returns the process exit status:
/// 0 success, 1 internal or solver failure, 2 usage, configuration or
/// input-file error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int exit_code(ErrorCode code);

std::string_view version();

}  // namespace affiltest::cli
