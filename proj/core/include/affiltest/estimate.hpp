#pragma once

#include <cstddef>
#include <vector>

#include "affiltest/affiliation.hpp"
#include "affiltest/error.hpp"
#include "affiltest/grid.hpp"
#include "affiltest/symmetry.hpp"

namespace affiltest {

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 500;
  /// Lower bound on every orbit mass inside the solver.
  double epsilon_floor = 1e-10;
  ConstraintMode constraint_mode = ConstraintMode::kAdjacent;
  double activity_tol = 1e-6;
  /// Weight of the uniform point in the starting value.
  double init_blend = 0.1;
  double mu0 = 1.0;
  double mu_factor = 10.0;
};

struct EstimateResult {
  CellArray masses;
  /// Mass of a single cell of each orbit; empty for the unconstrained fit.
  std::vector<double> orbit_masses;
  /// sum y log(pi), without the multinomial constant. -inf when a positive
  /// count meets a zero mass.
  double loglik = 0.0;
  std::vector<std::size_t> active_constraints;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Raised when the constrained solver exhausts its iteration budget. Carries
/// the last iterate.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, EstimateResult best)
      : Error(ErrorCode::kSolverNonconvergence, what), best_(std::move(best)) {}
  const EstimateResult& best() const { return best_; }

 private:
  EstimateResult best_;
};

double loglik(const CellArray& counts, const CellArray& masses);

/// Likelihood of the center of the simplex (every cell 1/L).
double loglik_center(const CellArray& counts);

EstimateResult mle_unconstrained(const CellArray& counts);
EstimateResult mle_symmetric(const CellArray& counts);

/// Product of a pooled one-dimensional marginal, which is symmetric by
/// construction.
EstimateResult mle_independent_symmetric(const CellArray& counts);
std::vector<double> pooled_marginal(const CellArray& counts);

/// Symmetric MLE under the TP2 constraints of `cs` (which must be a
/// symmetric set on the same k and N).
///
/// Works on log-masses of orbit representatives with a log-barrier on the
/// TP2 rows and on the floor theta >= log(epsilon_floor); the adding-up
/// condition is kept exact by a softmax chart, so every Newton step stays
/// on the simplex. When the symmetric MLE already satisfies every
/// constraint it is returned unchanged.
///
/// kkt_residual is the infinity norm of stationarity, complementary
/// slackness (both divided by T) and primal infeasibility,
/// using multipliers refitted on the rows within activity_tol of binding.
EstimateResult mle_affiliated(const CellArray& counts, const ConstraintSet& cs,
                              const SolverOptions& opts = {});

}  // namespace affiltest
