#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "affiltest/grid.hpp"
#include "affiltest/inference.hpp"

namespace affiltest {

/// A grid distribution to sample auctions from.
struct Dgp {
  CellArray masses;
  std::string label;
};

/// T tuples: a cell drawn with probability equal to its mass, then a point
/// uniform inside the cell's box (each side half-open on the left, like the
/// binning convention). Deterministic in `seed`.
std::vector<Tuple> sample(const Dgp& dgp, std::size_t t, std::uint64_t seed);

/// exp(beta * sum_{a<b} u_a u_b) on [0,1]^N, normalized numerically. It is
/// log-supermodular, hence affiliated, for beta >= 0.
Density positive_dependence_density(int bidders, double beta);

Dgp uniform_dgp(int k, int bidders);
/// Independent draws from a geometric marginal q_j proportional to ratio^j.
Dgp independent_skewed_dgp(int k, int bidders, double ratio = 0.6);
/// Symmetric 2x2 (a, d; d, b) with a = b and ab - d^2 = rho, 0 <= rho <= 1/4.
Dgp affiliated_2x2(double rho = 0.2);
/// Symmetric 2x2 with a = b and d^2 - ab = margin, 0 < margin < 1/4.
Dgp violating_2x2(double margin = 0.1);
/// Discretization of positive_dependence_density on an equispaced k^N grid.
Dgp affiliated_density_dgp(int k, int bidders, double beta = 2.0);

/// Named catalog: uniform, independent-skewed, affiliated-2x2,
/// violating-2x2, affiliated-3x3.
std::vector<Dgp> builtin_dgps();

/// Catalog lookup for the command line; `param` overrides the DGP's
/// parameter (rho, margin, ratio or beta).
Dgp make_dgp(const std::string& name, int k, int bidders, std::optional<double> param);

struct McOptions {
  std::size_t sample_size = 500;
  int replications = 500;
  std::uint64_t seed = 1;
  int threads = 1;
  TestOptions test;
  /// Grid used for counting; defaults to the DGP's grid.
  std::optional<GridSpec> analysis_grid;
};

struct McReplication {
  std::uint64_t seed = 0;
  double lr_stat = 0.0;
  double pvalue = 0.0;
  std::vector<Decision> decisions;  // Kodde-Palm decision per size
};

struct McResult {
  int replications = 0;
  std::uint64_t seed = 0;
  std::size_t sample_size = 0;
  std::string label;
  std::vector<double> sizes;
  std::vector<double> rate_pvalue;    // p-value < size (NaN without weights)
  std::vector<double> rate_kp_lower;  // stat > lower bound
  std::vector<double> rate_kp_upper;  // stat > upper bound
  double mean_lr = 0.0;
  double median_lr = 0.0;
  std::vector<McReplication> rows;
};

/// Replication r samples with stream_seed(seed, r), counts on the analysis
/// grid and runs the test; results do not depend on `threads`.
McResult mc_study(const Dgp& dgp, const McOptions& opts);

std::string to_json(const McResult& result);
void write_csv(std::ostream& os, const McResult& result);

}  // namespace affiltest
