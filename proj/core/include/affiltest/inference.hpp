#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "affiltest/affiliation.hpp"
#include "affiltest/estimate.hpp"
#include "affiltest/grid.hpp"

namespace affiltest {

/// 2 (l_hat - l_tilde), clamped at zero. Throws kSolverInconsistency when
/// l_tilde exceeds l_hat by more than `tol`.
double lr_statistic(double l_hat, double l_tilde, double tol = 1e-8);

struct ConstraintCovariance {
  Eigen::MatrixXd h;      // J x M gradients of the log-form constraints
  Eigen::MatrixXd sigma;  // M x M covariance of the per-cell orbit masses
  Eigen::MatrixXd pi0;    // h sigma h'
};

/// Delta-method covariance of the constraint functions at `masses` for a
/// sample of size T, in orbit coordinates. Throws kDegenerateCovariance
/// when a cell used by a constraint has zero mass.
ConstraintCovariance constraint_covariance(const CellArray& masses, const ConstraintSet& cs,
                                           double sample_size);

/// Solution of min_{b >= 0} (z - b)' P^{-1} (z - b), obtained from the
/// equivalent problem min_{m >= 0} m' P m / 2 + z' m with b = z + P m, so P
/// is never inverted. Components with a positive multiplier bind (b_i = 0).
struct OrthantProjection {
  Eigen::VectorXd b;
  Eigen::VectorXd multipliers;
  int binding = 0;
};

OrthantProjection project_orthant(const Eigen::MatrixXd& p, const Eigen::VectorXd& z);

struct ChiBarWeights {
  std::vector<double> omega;  // omega[j] = P(j constraints bind), j = 0..J
  bool regularized = false;
};

/// Monte Carlo chi-bar-squared weights: `draws` normal vectors with
/// covariance pi0, each projected onto the nonnegative orthant in the
/// pi0^{-1} metric. Draw r uses its own generator seeded by
/// stream_seed(seed, r), so the weights do not depend on `threads`.
/// A numerically singular pi0 gets a ridge of 1e-10 trace / J.
ChiBarWeights chibar_weights(const Eigen::MatrixXd& pi0, int draws, std::uint64_t seed,
                             int threads = 1);

/// sum_j omega_j P(chi^2_j >= stat).
double chibar_pvalue(double stat, std::span<const double> weights);

struct KpBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Kodde-Palm critical values: the lower bound solves
/// P(chi^2_1 >= c) / 2 = size, the upper solves
/// (P(chi^2_{J-1} >= c) + P(chi^2_J >= c)) / 2 = size.
KpBounds kodde_palm_bounds(int j, double size);

enum class Decision { kReject, kInconclusive, kFailToReject };

std::string_view to_string(Decision d);
Decision parse_decision(std::string_view text);

Decision decide(double stat, double lower, double upper);

struct TestOptions {
  SolverOptions solver;
  int draws = 100000;
  std::uint64_t seed = 20100101;
  std::vector<double> sizes{0.10, 0.05, 0.01};
  int threads = 1;
  /// Monte Carlo studies that only use the Kodde-Palm rules can skip the
  /// weights.
  bool compute_weights = true;
};

struct TestReport {
  // Grid.
  int intervals = 0;
  int bidders = 0;
  std::vector<double> breakpoints;
  bool equispaced = true;
  std::size_t num_cells = 0;   // L
  std::size_t num_orbits = 0;  // M
  double sample_size = 0.0;    // T

  double loglik_unconstrained = 0.0;
  double loglik_symmetric = 0.0;
  double loglik_affiliated = 0.0;
  double loglik_independent = 0.0;
  double loglik_center = 0.0;

  /// Symmetric versus symmetric-affiliated.
  double lr_stat = 0.0;
  /// Unrestricted versus symmetric-affiliated (reported alongside).
  double lr_stat_unconstrained = 0.0;

  std::size_t j = 0;
  std::vector<std::size_t> active_constraints;
  std::vector<double> weights;
  bool weights_computed = false;
  bool pi0_regularized = false;
  bool pi0_floored = false;
  double pvalue = 1.0;

  std::vector<double> sizes;
  std::vector<double> kp_lower;
  std::vector<double> kp_upper;
  std::vector<Decision> decision;

  std::uint64_t seed = 0;
  int draws = 0;
  ConstraintMode constraint_mode = ConstraintMode::kAdjacent;
  double tol = 0.0;
  int max_iter = 0;
  double epsilon_floor = 0.0;
  double kkt_residual = 0.0;
  int solver_iterations = 0;

  std::vector<double> affiliated_orbit_masses;
};

/// Full pipeline on a counts array: all five likelihoods, the LR statistic,
/// chi-bar weights and p-value at the affiliated estimate, Kodde-Palm bounds
/// and a decision per size.
TestReport run_test(const CellArray& counts, const TestOptions& opts = {});

std::string to_json(const TestReport& report);
TestReport report_from_json(std::string_view json);
std::string text_summary(const TestReport& report);

}  // namespace affiltest
