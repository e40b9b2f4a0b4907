#include "affiltest/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "affiltest/chisq.hpp"
#include "affiltest/error.hpp"
#include "affiltest/random.hpp"
#include "affiltest/symmetry.hpp"

namespace affiltest {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double lr_statistic(double l_hat, double l_tilde, double tol) {
  if (l_hat < l_tilde - tol) {
    throw Error(ErrorCode::kSolverInconsistency,
                "restricted likelihood " + std::to_string(l_tilde) + " exceeds unrestricted " +
                    std::to_string(l_hat));
  }
  return std::max(0.0, 2.0 * (l_hat - l_tilde));
}

ConstraintCovariance constraint_covariance(const CellArray& masses, const ConstraintSet& cs,
                                           double sample_size) {
  const GridSpec& grid = masses.grid();
  if (cs.intervals != grid.intervals() || cs.bidders != grid.bidders()) {
    throw Error(ErrorCode::kDimensionMismatch, "constraint set does not match the grid");
  }
  if (!(sample_size > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sample size must be positive");
  }
  const OrbitModel model = enumerate_orbits(grid.intervals(), grid.bidders());
  const auto m = static_cast<Index>(model.size());
  VectorXd pi(m), q(m);
  for (Index i = 0; i < m; ++i) {
    const auto& rep = model.representatives[static_cast<std::size_t>(i)];
    pi(i) = masses.at(rep);
    q(i) = pi(i) * static_cast<double>(model.sizes[static_cast<std::size_t>(i)]);
  }

  ConstraintCovariance out;
  out.h = MatrixXd::Zero(static_cast<Index>(cs.size()), m);
  for (std::size_t j = 0; j < cs.size(); ++j) {
    for (const auto& e : cs.constraints[j].orbit_row) {
      const auto col = static_cast<Index>(e.id);
      if (!(pi(col) > 0.0)) {
        std::string cell;
        for (int v : model.representatives[e.id]) cell += (cell.empty() ? "" : ",") + std::to_string(v);
        throw Error(ErrorCode::kDegenerateCovariance,
                    "zero mass at cell (" + cell + ") used by constraint " + std::to_string(j));
      }
      out.h(static_cast<Index>(j), col) = e.coef / pi(col);
    }
  }

  // Orbit totals are multinomial(T, q); a cell of orbit m has mass q_m / s_m.
  MatrixXd cov_q = -q * q.transpose();
  cov_q.diagonal() += q;
  VectorXd inv_s(m);
  for (Index i = 0; i < m; ++i) inv_s(i) = 1.0 / static_cast<double>(model.sizes[static_cast<std::size_t>(i)]);
  out.sigma = inv_s.asDiagonal() * cov_q * inv_s.asDiagonal() / sample_size;
  out.pi0 = out.h * out.sigma * out.h.transpose();
  out.pi0 = 0.5 * (out.pi0 + out.pi0.transpose());
  return out;
}

OrthantProjection project_orthant(const MatrixXd& p, const VectorXd& z) {
  const Index n = z.size();
  if (p.rows() != n || p.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "projection matrix and vector disagree");
  }
  VectorXd mult = VectorXd::Zero(n);
  std::vector<char> free(static_cast<std::size_t>(n), 0);
  const double scale = (1.0 + z.lpNorm<Eigen::Infinity>()) *
                       (1.0 + p.diagonal().cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  // Lawson-Hanson active set on the multipliers.
  for (Index outer = 0; outer < 3 * n + 10; ++outer) {
    const VectorXd w = -(p * mult + z);
    Index pick = -1;
    double best = tol;
    for (Index i = 0; i < n; ++i) {
      if (!free[static_cast<std::size_t>(i)] && w(i) > best) {
        best = w(i);
        pick = i;
      }
    }
    if (pick < 0) break;
    free[static_cast<std::size_t>(pick)] = 1;

    for (Index inner = 0; inner <= n; ++inner) {
      std::vector<Index> idx;
      for (Index i = 0; i < n; ++i)
        if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
      const auto f = static_cast<Index>(idx.size());
      MatrixXd pff(f, f);
      VectorXd rhs(f);
      for (Index a = 0; a < f; ++a) {
        rhs(a) = -z(idx[static_cast<std::size_t>(a)]);
        for (Index b = 0; b < f; ++b) pff(a, b) = p(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      }
      const VectorXd s = pff.ldlt().solve(rhs);
      if (s.size() == 0 || s.minCoeff() > 0.0) {
        mult.setZero();
        for (Index a = 0; a < f; ++a) mult(idx[static_cast<std::size_t>(a)]) = s(a);
        break;
      }
      double alpha = 1.0;
      for (Index a = 0; a < f; ++a) {
        const Index i = idx[static_cast<std::size_t>(a)];
        if (s(a) <= 0.0) alpha = std::min(alpha, mult(i) / (mult(i) - s(a)));
      }
      for (Index a = 0; a < f; ++a) {
        const Index i = idx[static_cast<std::size_t>(a)];
        mult(i) += alpha * (s(a) - mult(i));
        if (mult(i) <= tol) {
          mult(i) = 0.0;
          free[static_cast<std::size_t>(i)] = 0;
        }
      }
    }
  }

  OrthantProjection out;
  out.multipliers = mult;
  out.b = z + p * mult;
  for (Index i = 0; i < n; ++i) {
    if (mult(i) > 0.0) {
      out.b(i) = 0.0;
      ++out.binding;
    }
  }
  return out;
}

ChiBarWeights chibar_weights(const MatrixXd& pi0, int draws, std::uint64_t seed, int threads) {
  const Index j = pi0.rows();
  if (pi0.cols() != j || j < 1) {
    throw Error(ErrorCode::kInvalidArgument, "pi0 must be a nonempty square matrix");
  }
  if (draws < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one draw");

  ChiBarWeights out;
  MatrixXd p = 0.5 * (pi0 + pi0.transpose());
  const double trace = p.trace();
  if (!(trace > 0.0)) {
    throw Error(ErrorCode::kDegenerateCovariance, "pi0 has nonpositive trace");
  }
  const double ridge = 1e-10 * trace / static_cast<double>(j);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= ridge) {
    p.diagonal().array() += ridge;
    out.regularized = true;
  }
  const Eigen::LLT<MatrixXd> llt(p);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kDegenerateCovariance, "pi0 is not positive semidefinite");
  }
  const MatrixXd factor = llt.matrixL();

  threads = std::max(1, std::min(threads, draws));
  std::vector<std::vector<long>> hist(static_cast<std::size_t>(threads),
                                      std::vector<long>(static_cast<std::size_t>(j) + 1, 0));
  auto work = [&](int worker) {
    const long lo = static_cast<long>(draws) * worker / threads;
    const long hi = static_cast<long>(draws) * (worker + 1) / threads;
    VectorXd e(j);
    for (long r = lo; r < hi; ++r) {
      SplitMix64 gen(stream_seed(seed, static_cast<std::uint64_t>(r)));
      std::normal_distribution<double> normal;
      for (Index i = 0; i < j; ++i) e(i) = normal(gen);
      const OrthantProjection proj = project_orthant(p, factor * e);
      ++hist[static_cast<std::size_t>(worker)][static_cast<std::size_t>(proj.binding)];
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::vector<long> total(static_cast<std::size_t>(j) + 1, 0);
  for (const auto& h : hist)
    for (std::size_t b = 0; b < h.size(); ++b) total[b] += h[b];
  out.omega.resize(total.size());
  for (std::size_t b = 0; b < total.size(); ++b) {
    out.omega[b] = static_cast<double>(total[b]) / static_cast<double>(draws);
  }
  return out;
}

double chibar_pvalue(double stat, std::span<const double> weights) {
  if (weights.empty()) throw Error(ErrorCode::kInvalidArgument, "empty weight vector");
  double p = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    p += weights[j] * chi2_sf(static_cast<int>(j), stat);
  }
  return std::clamp(p, 0.0, 1.0);
}

namespace {

// Root of a nonincreasing tail function equal to `size` on [0, 1000].
template <class Tail>
double solve_tail(const Tail& tail, double size) {
  double lo = 0.0, hi = 1000.0;
  if (tail(lo) <= size) return 0.0;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > size ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

KpBounds kodde_palm_bounds(int j, double size) {
  if (j < 1) throw Error(ErrorCode::kInvalidArgument, "Kodde-Palm bounds need J >= 1");
  if (!(size > 0.0 && size < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test size must lie in (0, 1)");
  }
  KpBounds b;
  b.lower = solve_tail([](double c) { return 0.5 * chi2_sf(1, c); }, size);
  b.upper = solve_tail(
      [j](double c) { return 0.5 * (chi2_sf(j - 1, c) + chi2_sf(j, c)); }, size);
  return b;
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kReject: return "reject";
    case Decision::kInconclusive: return "inconclusive";
    case Decision::kFailToReject: return "fail_to_reject";
  }
  return "unknown";
}

Decision parse_decision(std::string_view text) {
  if (text == "reject") return Decision::kReject;
  if (text == "inconclusive") return Decision::kInconclusive;
  if (text == "fail_to_reject") return Decision::kFailToReject;
  throw Error(ErrorCode::kFormat, "unknown decision '" + std::string(text) + "'");
}

Decision decide(double stat, double lower, double upper) {
  if (lower > upper) throw Error(ErrorCode::kInvalidArgument, "lower bound exceeds upper bound");
  if (stat < lower) return Decision::kFailToReject;
  if (stat > upper) return Decision::kReject;
  return Decision::kInconclusive;
}

TestReport run_test(const CellArray& counts, const TestOptions& opts) {
  const GridSpec& grid = counts.grid();
  for (double s : opts.sizes) {
    if (!(s > 0.0 && s < 1.0)) throw Error(ErrorCode::kInvalidArgument, "test size must lie in (0, 1)");
  }

  TestReport rep;
  rep.intervals = grid.intervals();
  rep.bidders = grid.bidders();
  rep.breakpoints.assign(grid.breakpoints().begin(), grid.breakpoints().end());
  rep.equispaced = grid.is_equispaced();
  rep.num_cells = grid.num_cells();
  rep.num_orbits = num(grid.intervals(), grid.bidders());
  rep.sample_size = counts.total();
  rep.seed = opts.seed;
  rep.draws = opts.draws;
  rep.constraint_mode = opts.solver.constraint_mode;
  rep.tol = opts.solver.tol;
  rep.max_iter = opts.solver.max_iter;
  rep.epsilon_floor = opts.solver.epsilon_floor;
  rep.sizes = opts.sizes;

  const EstimateResult unc = mle_unconstrained(counts);
  const EstimateResult sym = mle_symmetric(counts);
  rep.loglik_unconstrained = unc.loglik;
  rep.loglik_symmetric = sym.loglik;
  rep.loglik_independent = mle_independent_symmetric(counts).loglik;
  rep.loglik_center = loglik_center(counts);

  const ConstraintSet cs =
      generate(grid.intervals(), grid.bidders(), opts.solver.constraint_mode, true);
  rep.j = cs.size();

  const EstimateResult aff = mle_affiliated(counts, cs, opts.solver);
  rep.loglik_affiliated = aff.loglik;
  rep.active_constraints = aff.active_constraints;
  rep.kkt_residual = aff.kkt_residual;
  rep.solver_iterations = aff.iterations;
  rep.affiliated_orbit_masses = aff.orbit_masses;
  rep.lr_stat = lr_statistic(sym.loglik, aff.loglik, opts.solver.tol);
  rep.lr_stat_unconstrained = lr_statistic(unc.loglik, aff.loglik, opts.solver.tol);

  if (cs.size() == 0) {
    rep.weights = {1.0};
    rep.weights_computed = true;
    rep.pvalue = 1.0;
    for (std::size_t s = 0; s < opts.sizes.size(); ++s) {
      rep.kp_lower.push_back(0.0);
      rep.kp_upper.push_back(0.0);
      rep.decision.push_back(Decision::kFailToReject);
    }
    return rep;
  }

  if (opts.compute_weights) {
    ConstraintCovariance cov;
    try {
      cov = constraint_covariance(aff.masses, cs, rep.sample_size);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateCovariance) throw;
      // Exact zeros (symmetric MLE returned as is): evaluate at the floor.
      CellArray floored = aff.masses;
      for (double& v : floored.values()) v = std::max(v, opts.solver.epsilon_floor);
      const double z = floored.total();
      for (double& v : floored.values()) v /= z;
      cov = constraint_covariance(floored, cs, rep.sample_size);
      rep.pi0_floored = true;
    }
    const ChiBarWeights w = chibar_weights(cov.pi0, opts.draws, opts.seed, opts.threads);
    rep.weights = w.omega;
    rep.pi0_regularized = w.regularized;
    rep.weights_computed = true;
    rep.pvalue = chibar_pvalue(rep.lr_stat, rep.weights);
  } else {
    rep.pvalue = std::numeric_limits<double>::quiet_NaN();
  }

  for (double size : opts.sizes) {
    const KpBounds b = kodde_palm_bounds(static_cast<int>(cs.size()), size);
    rep.kp_lower.push_back(b.lower);
    rep.kp_upper.push_back(b.upper);
    rep.decision.push_back(decide(rep.lr_stat, b.lower, b.upper));
  }
  return rep;
}

}  // namespace affiltest
