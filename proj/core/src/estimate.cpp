#include "affiltest/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

namespace affiltest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double require_counts(const CellArray& counts) {
  if (counts.kind() != CellKind::kCounts) {
    throw Error(ErrorCode::kInvalidArgument, "expected a counts array");
  }
  for (double y : counts.values()) {
    if (!(y >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative count");
  }
  const double t = counts.total();
  if (t < 1.0) throw Error(ErrorCode::kEmptySample, "no observations (T = 0)");
  return t;
}

double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  if (y <= 0.0) return kNegInf;
  return x * std::log(y);
}

OrbitModel model_for(const GridSpec& grid) {
  return enumerate_orbits(grid.intervals(), grid.bidders());
}

}  // namespace

double loglik(const CellArray& counts, const CellArray& masses) {
  if (!(counts.grid() == masses.grid())) {
    throw Error(ErrorCode::kDimensionMismatch, "counts and masses live on different grids");
  }
  double l = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) l += xlogy(counts[c], masses[c]);
  return l;
}

double loglik_center(const CellArray& counts) {
  const double t = require_counts(counts);
  return t * std::log(1.0 / static_cast<double>(counts.size()));
}

EstimateResult mle_unconstrained(const CellArray& counts) {
  const double t = require_counts(counts);
  CellArray masses(counts.grid(), CellKind::kMass);
  for (std::size_t c = 0; c < counts.size(); ++c) masses[c] = counts[c] / t;
  const double l = loglik(counts, masses);
  return {std::move(masses), {}, l, {}, 0.0, 0};
}

EstimateResult mle_symmetric(const CellArray& counts) {
  const double t = require_counts(counts);
  const OrbitModel model = model_for(counts.grid());
  const std::vector<double> totals = symmetrize(counts, model);
  std::vector<double> per_cell(model.size());
  for (std::size_t m = 0; m < model.size(); ++m) {
    per_cell[m] = totals[m] / (t * static_cast<double>(model.sizes[m]));
  }
  CellArray masses = expand_orbits(per_cell, model, counts.grid(), CellKind::kMass);
  const double l = loglik(counts, masses);
  return {std::move(masses), std::move(per_cell), l, {}, 0.0, 0};
}

std::vector<double> pooled_marginal(const CellArray& counts) {
  const double t = require_counts(counts);
  const GridSpec& grid = counts.grid();
  std::vector<double> q(static_cast<std::size_t>(grid.intervals()), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0.0) continue;
    for (int i : grid.index(c)) q[static_cast<std::size_t>(i - 1)] += counts[c];
  }
  for (double& v : q) v /= t * grid.bidders();
  return q;
}

EstimateResult mle_independent_symmetric(const CellArray& counts) {
  const std::vector<double> q = pooled_marginal(counts);
  const GridSpec& grid = counts.grid();
  CellArray masses(grid, CellKind::kMass);
  for (std::size_t c = 0; c < masses.size(); ++c) {
    double p = 1.0;
    for (int i : grid.index(c)) p *= q[static_cast<std::size_t>(i - 1)];
    masses[c] = p;
  }
  const OrbitModel model = model_for(grid);
  std::vector<double> per_cell(model.size());
  for (std::size_t m = 0; m < model.size(); ++m) {
    per_cell[m] = masses.at(model.representatives[m]);
  }
  const double l = loglik(counts, masses);
  return {std::move(masses), std::move(per_cell), l, {}, 0.0, 0};
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double log_sum_exp(const VectorXd& phi, const VectorXd& log_sizes) {
  const VectorXd z = phi + log_sizes;
  const double hi = z.maxCoeff();
  return hi + std::log((z.array() - hi).exp().sum());
}

// Lawson-Hanson nonnegative least squares, min |g x - b| over x >= 0.
VectorXd nnls(const MatrixXd& g, const VectorXd& b) {
  const Eigen::Index n = g.cols();
  VectorXd x = VectorXd::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  const double tol = 1e-12 * (1.0 + b.lpNorm<Eigen::Infinity>()) *
                     (1.0 + g.cwiseAbs().maxCoeff());
  for (Eigen::Index outer = 0; outer < 3 * n + 10; ++outer) {
    const VectorXd w = g.transpose() * (b - g * x);
    Eigen::Index pick = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best) {
        best = w(i);
        pick = i;
      }
    }
    if (pick < 0) break;
    passive[static_cast<std::size_t>(pick)] = 1;
    for (Eigen::Index inner = 0; inner <= n; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
      MatrixXd gp(g.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t a = 0; a < idx.size(); ++a) gp.col(static_cast<Eigen::Index>(a)) = g.col(idx[a]);
      const VectorXd z = gp.colPivHouseholderQr().solve(b);
      if (z.minCoeff() > 0.0) {
        x.setZero();
        for (std::size_t a = 0; a < idx.size(); ++a) x(idx[a]) = z(static_cast<Eigen::Index>(a));
        break;
      }
      double alpha = 1.0;
      for (std::size_t a = 0; a < idx.size(); ++a) {
        const double za = z(static_cast<Eigen::Index>(a));
        if (za <= 0.0) alpha = std::min(alpha, x(idx[a]) / (x(idx[a]) - za));
      }
      for (std::size_t a = 0; a < idx.size(); ++a) {
        double& xi = x(idx[a]);
        xi += alpha * (z(static_cast<Eigen::Index>(a)) - xi);
        if (xi <= tol) {
          xi = 0.0;
          passive[static_cast<std::size_t>(idx[a])] = 0;
        }
      }
    }
  }
  return x;
}

// Barrier problem over phi (theta = phi - lse(phi)):
//   B(phi) = -y.phi + T lse(phi) - mu sum log(A phi) - mu sum log(theta - log eps)
class BarrierProblem {
 public:
  BarrierProblem(VectorXd y, VectorXd sizes, MatrixXd a, double log_eps)
      : y_(std::move(y)),
        log_sizes_(sizes.array().log()),
        a_(std::move(a)),
        log_eps_(log_eps),
        t_(y_.sum()) {}

  // +inf outside the barrier domain.
  double value(const VectorXd& phi, double mu) const {
    const double lse = log_sum_exp(phi, log_sizes_);
    const VectorXd r = a_ * phi;
    const VectorXd c = phi.array() - lse - log_eps_;
    if ((r.size() > 0 && r.minCoeff() <= 0.0) || c.minCoeff() <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    return -y_.dot(phi) + t_ * lse - mu * (r.array().log().sum() + c.array().log().sum());
  }

  void derivatives(const VectorXd& phi, double mu, VectorXd& grad, MatrixXd& hess) const {
    const auto m = phi.size();
    const double lse = log_sum_exp(phi, log_sizes_);
    const VectorXd q = (phi + log_sizes_).array().unaryExpr([lse](double v) {
      return std::exp(v - lse);
    });
    const VectorXd r = a_ * phi;
    const VectorXd c = phi.array() - lse - log_eps_;
    const VectorXd inv_r = r.cwiseInverse();
    const VectorXd inv_c = c.cwiseInverse();
    const VectorXd w = inv_c.cwiseAbs2();
    const double sum_inv_c = inv_c.sum();

    MatrixXd dq = -q * q.transpose();
    dq.diagonal() += q;

    grad = -y_ + t_ * q - mu * (a_.transpose() * inv_r) - mu * inv_c + mu * sum_inv_c * q;

    hess = (t_ + mu * sum_inv_c) * dq;
    if (a_.rows() > 0) {
      hess.noalias() += mu * a_.transpose() * inv_r.cwiseAbs2().asDiagonal() * a_;
    }
    MatrixXd floor_term = w.sum() * q * q.transpose() - w * q.transpose() - q * w.transpose();
    floor_term.diagonal() += w;
    hess += mu * floor_term;
    (void)m;
  }

  // Infinity norm of the KKT conditions of the unbarriered problem, with
  // multipliers refitted by nonnegative least squares on the rows within
  // `active_tol` of their bound (these rows are often linearly dependent). The barrier multipliers mu / r are too noisy for this
  // near the boundary, where the Hessian is very stiff.
  double kkt(const VectorXd& phi, double active_tol) const {
    const double lse = log_sum_exp(phi, log_sizes_);
    const VectorXd q = (phi + log_sizes_).array().unaryExpr([lse](double v) {
      return std::exp(v - lse);
    });
    const VectorXd g0 = -y_ + t_ * q;
    const VectorXd r = a_ * phi;
    const VectorXd c = phi.array() - lse - log_eps_;
    std::vector<VectorXd> cols;
    std::vector<double> slack;
    for (Eigen::Index j = 0; j < r.size(); ++j) {
      if (r(j) <= active_tol) {
        cols.emplace_back(a_.row(j).transpose());
        slack.push_back(r(j));
      }
    }
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c(i) <= active_tol) {
        VectorXd e = -q;
        e(i) += 1.0;
        cols.emplace_back(std::move(e));
        slack.push_back(c(i));
      }
    }
    const double scale = std::max(1.0, t_);
    double stationarity = g0.lpNorm<Eigen::Infinity>();
    double other = 0.0;
    if (!cols.empty()) {
      MatrixXd g(phi.size(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) g.col(static_cast<Eigen::Index>(j)) = cols[j];
      const VectorXd lambda = nnls(g, g0);
      stationarity = (g0 - g * lambda).lpNorm<Eigen::Infinity>();
      for (std::size_t j = 0; j < cols.size(); ++j) {
        other = std::max(other, std::abs(lambda(static_cast<Eigen::Index>(j)) * slack[j]) / scale);
      }
    }
    const double infeas = r.size() > 0 ? std::max(0.0, -r.minCoeff()) : 0.0;
    return std::max({stationarity / scale, other, infeas});
  }

  double lse(const VectorXd& phi) const { return log_sum_exp(phi, log_sizes_); }
  const MatrixXd& rows() const { return a_; }
  double total() const { return t_; }
  Eigen::Index terms() const { return a_.rows() + y_.size(); }

 private:
  VectorXd y_;
  VectorXd log_sizes_;
  MatrixXd a_;
  double log_eps_;
  double t_;
};

EstimateResult assemble(const CellArray& counts, const OrbitModel& model,
                        const ConstraintSet& cs, std::vector<double> per_cell,
                        const SolverOptions& opts, double kkt, int iterations) {
  CellArray masses = expand_orbits(per_cell, model, counts.grid(), CellKind::kMass);
  EstimateResult out{std::move(masses), std::move(per_cell), 0.0, {}, kkt, iterations};
  out.loglik = loglik(counts, out.masses);
  const std::vector<double> r = residuals(out.masses, cs);
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (r[j] <= opts.activity_tol) out.active_constraints.push_back(j);
  }
  return out;
}

}  // namespace

EstimateResult mle_affiliated(const CellArray& counts, const ConstraintSet& cs,
                              const SolverOptions& opts) {
  const double t = require_counts(counts);
  const GridSpec& grid = counts.grid();
  if (!cs.symmetric) {
    throw Error(ErrorCode::kInvalidArgument,
                "the affiliated MLE is defined for symmetric constraint sets only");
  }
  if (cs.intervals != grid.intervals() || cs.bidders != grid.bidders()) {
    throw Error(ErrorCode::kDimensionMismatch, "constraint set does not match the grid");
  }
  if (!(opts.epsilon_floor > 0.0 && opts.epsilon_floor < 1.0 / grid.num_cells())) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon floor must lie in (0, 1/L)");
  }

  const OrbitModel model = model_for(grid);
  const auto m = static_cast<Eigen::Index>(model.size());
  const std::vector<double> totals = symmetrize(counts, model);

  // The symmetric MLE is optimal whenever it is feasible.
  EstimateResult sym = mle_symmetric(counts);
  {
    const std::vector<double> r = residuals(sym.masses, cs);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v >= 0.0; })) {
      return assemble(counts, model, cs, sym.orbit_masses, opts, 0.0, 0);
    }
  }

  VectorXd y(m), sizes(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    y(i) = totals[static_cast<std::size_t>(i)];
    sizes(i) = static_cast<double>(model.sizes[static_cast<std::size_t>(i)]);
  }
  const BarrierProblem problem(y, sizes, cs.orbit_matrix(model.size()),
                               std::log(opts.epsilon_floor));
  const MatrixXd& a = problem.rows();

  // Start near the data, pulled toward a strictly TP2 point when needed.
  const double cells = static_cast<double>(grid.num_cells());
  VectorXd phi(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    phi(i) = std::log((1.0 - opts.init_blend) * sym.orbit_masses[static_cast<std::size_t>(i)] +
                      opts.init_blend / cells);
  }
  VectorXd r0 = a * phi;
  if (r0.minCoeff() <= 0.0) {
    // log P(i) proportional to sum_{a<b} i_a i_b is strictly supermodular.
    VectorXd strict(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& rep = model.representatives[static_cast<std::size_t>(i)];
      double s = 0.0;
      for (std::size_t p = 0; p < rep.size(); ++p)
        for (std::size_t q = p + 1; q < rep.size(); ++q) s += rep[p] * rep[q];
      strict(i) = s;
    }
    strict *= 5.0 / std::max(1.0, strict.maxCoeff() - strict.minCoeff());
    const VectorXd rs = a * strict;
    double t_min = 0.0;
    for (Eigen::Index j = 0; j < r0.size(); ++j) {
      if (r0(j) <= 0.0) t_min = std::max(t_min, -r0(j) / (rs(j) - r0(j)));
    }
    const double blend = t_min + 0.1 * (1.0 - t_min);
    phi = (1.0 - blend) * phi + blend * strict;
  }
  phi.array() -= problem.lse(phi);
  if (!std::isfinite(problem.value(phi, 1.0))) {
    throw Error(ErrorCode::kInternal, "could not construct a strictly feasible start");
  }

  const double inner_tol = std::min(1e-10, opts.tol * 1e-3);
  const double stop_mu = 0.1 * opts.tol / static_cast<double>(problem.terms());
  double mu = opts.mu0;
  int iterations = 0;

  auto best_iterate = [&] {
    std::vector<double> per_cell(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) per_cell[static_cast<std::size_t>(i)] = std::exp(phi(i));
    return per_cell;
  };

  VectorXd grad;
  MatrixXd hess;
  for (;;) {
    for (;;) {
      problem.derivatives(phi, mu, grad, hess);
      // B is invariant along the all-ones direction; fix the gauge.
      const double gauge = std::max(1.0, hess.trace() / static_cast<double>(m));
      hess.array() += gauge / static_cast<double>(m);
      const VectorXd step = hess.ldlt().solve(-grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement)) {
        throw Error(ErrorCode::kInternal, "non-finite Newton step");
      }
      if (decrement / 2.0 <= inner_tol) break;

      if (++iterations > opts.max_iter) {
        throw SolverError("affiliated MLE did not converge in " +
                              std::to_string(opts.max_iter) + " Newton iterations",
                          assemble(counts, model, cs, best_iterate(), opts,
                                   problem.kkt(phi, opts.activity_tol), iterations - 1));
      }

      const double f0 = problem.value(phi, mu);
      double s = 1.0;
      bool moved = false;
      for (int half = 0; half < 60; ++half, s *= 0.5) {
        VectorXd trial = phi + s * step;
        trial.array() -= problem.lse(trial);
        const double f1 = problem.value(trial, mu);
        if (f1 <= f0 - 1e-4 * s * decrement) {
          phi = std::move(trial);
          moved = true;
          break;
        }
      }
      if (!moved) break;  // at the floating-point floor for this mu
    }
    if (mu <= stop_mu) break;
    mu = std::max(mu / opts.mu_factor, stop_mu);
  }

  std::vector<double> per_cell = best_iterate();
  double z = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) z += sizes(i) * per_cell[static_cast<std::size_t>(i)];
  for (double& p : per_cell) p /= z;
  (void)t;
  return assemble(counts, model, cs, std::move(per_cell), opts, problem.kkt(phi, opts.activity_tol),
                  iterations);
}

}  // namespace affiltest
