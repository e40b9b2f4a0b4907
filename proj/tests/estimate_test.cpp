#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "affiltest/affiliation.hpp"
#include "affiltest/error.hpp"
#include "affiltest/estimate.hpp"

namespace affiltest {
namespace {

CellArray counts_of(int k, int n, std::vector<double> y) {
  return CellArray(GridSpec::equispaced(k, n), CellKind::kCounts, std::move(y));
}

CellArray random_counts(int k, int n, int t, std::mt19937_64& gen) {
  const GridSpec g = GridSpec::equispaced(k, n);
  std::gamma_distribution<double> gam(0.7, 1.0);
  std::vector<double> w(g.num_cells());
  for (double& v : w) v = gam(gen);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  CellArray c(g, CellKind::kCounts);
  for (int i = 0; i < t; ++i) c[pick(gen)] += 1.0;
  return c;
}

// Symmetric 2x2 with orbits a = p11, d = p12 = p21, b = p22: the constrained
// optimum is either the symmetric MLE (when ab >= d^2) or the independence
// fit on the boundary ab = d^2.
double two_by_two_oracle(const CellArray& y) {
  const double t = y.total();
  const double ya = y[0], yd = y[1] + y[2], yb = y[3];
  auto xl = [](double c, double p) { return c == 0.0 ? 0.0 : c * std::log(p); };
  const double a = ya / t, d = yd / (2 * t), b = yb / t;
  if (a * b >= d * d) return xl(ya, a) + xl(yd, d) + xl(yb, b);
  const double x = (2 * ya + yd) / (2 * t);
  return xl(ya, x * x) + xl(yd, x * (1 - x)) + xl(yb, (1 - x) * (1 - x));
}

TEST(Loglik, SmallExamples) {
  const CellArray y = counts_of(2, 2, {1, 1, 1, 1});
  const CellArray p(y.grid(), CellKind::kMass, {0.25, 0.25, 0.25, 0.25});
  EXPECT_NEAR(loglik(y, p), -5.545177444479562, 1e-12);
  EXPECT_NEAR(loglik_center(y), -5.545177444479562, 1e-12);
  const CellArray zero(y.grid(), CellKind::kMass, {0.5, 0.5, 0.0, 0.0});
  EXPECT_EQ(loglik(y, zero), -std::numeric_limits<double>::infinity());
  const CellArray y2 = counts_of(2, 2, {2, 1, 0, 0});
  EXPECT_NEAR(loglik(y2, zero), 3 * std::log(0.5), 1e-12);
}

TEST(Loglik, CenterOfSimplexAnchor) {
  // 278 observations on 27 cells.
  std::vector<double> y(27, 0.0);
  for (int i = 0; i < 278; ++i) y[static_cast<std::size_t>(i * 7 % 27)] += 1.0;
  EXPECT_NEAR(loglik_center(counts_of(3, 3, y)), -916.24, 5e-3);
}

TEST(Loglik, IndependenceAnchor) {
  // 278 triples whose 834 entries split 353 / 401 / 80 over the intervals.
  std::vector<int> labels;
  labels.insert(labels.end(), 353, 1);
  labels.insert(labels.end(), 401, 2);
  labels.insert(labels.end(), 80, 3);
  const GridSpec g = GridSpec::equispaced(3, 3);
  CellArray y(g, CellKind::kCounts);
  for (std::size_t i = 0; i < labels.size(); i += 3) {
    y.at(CellIndex{labels[i], labels[i + 1], labels[i + 2]}) += 1.0;
  }
  const auto q = pooled_marginal(y);
  EXPECT_NEAR(q[0], 353.0 / 834, 1e-15);
  EXPECT_NEAR(q[2], 80.0 / 834, 1e-15);
  EXPECT_NEAR(mle_independent_symmetric(y).loglik, -784.67, 5e-3);
}

TEST(Mle, UnconstrainedIsFrequencies) {
  const auto r = mle_unconstrained(counts_of(2, 2, {3, 1, 0, 4}));
  EXPECT_DOUBLE_EQ(r.masses[0], 0.375);
  EXPECT_DOUBLE_EQ(r.masses[2], 0.0);
  EXPECT_NEAR(r.loglik, 3 * std::log(0.375) + std::log(0.125) + 4 * std::log(0.5), 1e-12);
}

TEST(Mle, SymmetricAveragesOrbits) {
  const auto r = mle_symmetric(counts_of(2, 2, {3, 1, 0, 4}));
  EXPECT_DOUBLE_EQ(r.masses[1], 1.0 / 16);
  EXPECT_DOUBLE_EQ(r.masses[2], 1.0 / 16);
  ASSERT_EQ(r.orbit_masses.size(), 3u);
  EXPECT_DOUBLE_EQ(r.orbit_masses[1], 1.0 / 16);
  EXPECT_NEAR(r.masses.total(), 1.0, 1e-15);
}

TEST(Mle, RejectsEmptyAndNonCounts) {
  EXPECT_THROW(mle_unconstrained(counts_of(2, 2, {0, 0, 0, 0})), Error);
  const CellArray m(GridSpec::equispaced(2, 2), CellKind::kMass, {0.25, 0.25, 0.25, 0.25});
  EXPECT_THROW(mle_symmetric(m), Error);
}

TEST(Affiliated, FeasibleSymmetricMleIsReturned) {
  const CellArray y = counts_of(2, 2, {40, 10, 10, 40});
  const auto cs = generate(2, 2, ConstraintMode::kAdjacent, true);
  const auto r = mle_affiliated(y, cs);
  EXPECT_NEAR(r.loglik, mle_symmetric(y).loglik, 1e-12);
  EXPECT_TRUE(r.active_constraints.empty());
}

TEST(Affiliated, ViolatedTwoByTwoHitsIndependence) {
  const CellArray y = counts_of(2, 2, {10, 40, 40, 10});
  const auto cs = generate(2, 2, ConstraintMode::kAdjacent, true);
  const auto r = mle_affiliated(y, cs);
  EXPECT_NEAR(r.loglik, two_by_two_oracle(y), 1e-6);
  EXPECT_NEAR(r.masses[0], 0.25, 1e-4);
  ASSERT_EQ(r.active_constraints.size(), 1u);
  EXPECT_LT(r.kkt_residual, 1e-6);
  EXPECT_NEAR(r.masses.total(), 1.0, 1e-12);
}

TEST(Affiliated, MatchesTwoByTwoOracle) {
  std::mt19937_64 gen(11);
  const auto cs = generate(2, 2, ConstraintMode::kAdjacent, true);
  for (int rep = 0; rep < 50; ++rep) {
    const CellArray y = random_counts(2, 2, 200, gen);
    const auto r = mle_affiliated(y, cs);
    EXPECT_NEAR(r.loglik, two_by_two_oracle(y), 1e-6) << rep;
  }
}

TEST(Affiliated, NestingAndFeasibility) {
  std::mt19937_64 gen(5);
  for (auto [k, n] : {std::pair{3, 2}, std::pair{2, 3}, std::pair{3, 3}, std::pair{4, 2}}) {
    const auto cs = generate(k, n, ConstraintMode::kAdjacent, true);
    const auto full = generate(k, n, ConstraintMode::kFull, true);
    for (int rep = 0; rep < 10; ++rep) {
      const CellArray y = random_counts(k, n, 300, gen);
      const auto r = mle_affiliated(y, cs);
      const double ls = mle_symmetric(y).loglik;
      const double lu = mle_unconstrained(y).loglik;
      EXPECT_LE(r.loglik, ls + 1e-8);
      EXPECT_LE(ls, lu + 1e-8);
      EXPECT_GE(r.loglik, mle_independent_symmetric(y).loglik - 1e-8);
      EXPECT_TRUE(check(r.masses, full, 1e-8).empty());
      EXPECT_NEAR(r.masses.total(), 1.0, 1e-10);
      EXPECT_LT(r.kkt_residual, 1e-6) << k << "," << n << " rep " << rep;
    }
  }
}

TEST(Affiliated, DeterministicAndPermutationInvariant) {
  std::mt19937_64 gen(9);
  const CellArray y = random_counts(3, 2, 150, gen);
  const auto cs = generate(3, 2, ConstraintMode::kAdjacent, true);
  const auto r1 = mle_affiliated(y, cs);
  const auto r2 = mle_affiliated(y, cs);
  EXPECT_EQ(r1.loglik, r2.loglik);
  EXPECT_EQ(std::vector<double>(r1.masses.values().begin(), r1.masses.values().end()),
            std::vector<double>(r2.masses.values().begin(), r2.masses.values().end()));
  // Transposing the counts leaves the symmetric problem unchanged.
  CellArray yt(y.grid(), CellKind::kCounts);
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) yt.at(CellIndex{i, j}) = y.at(CellIndex{j, i});
  EXPECT_NEAR(mle_affiliated(yt, cs).loglik, r1.loglik, 1e-9);
}

TEST(Affiliated, AdjacentAndFullAgree) {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 5; ++rep) {
    const CellArray y = random_counts(3, 2, 400, gen);
    const auto ra = mle_affiliated(y, generate(3, 2, ConstraintMode::kAdjacent, true));
    const auto rf = mle_affiliated(y, generate(3, 2, ConstraintMode::kFull, true));
    EXPECT_NEAR(ra.loglik, rf.loglik, 1e-6);
  }
}

TEST(Affiliated, IterationCapRaisesWithBestIterate) {
  const CellArray y = counts_of(3, 2, {5, 30, 1, 30, 5, 30, 1, 30, 5});
  SolverOptions opts;
  opts.max_iter = 1;
  try {
    mle_affiliated(y, generate(3, 2, ConstraintMode::kAdjacent, true), opts);
    FAIL() << "expected nonconvergence";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSolverNonconvergence);
    EXPECT_NEAR(e.best().masses.total(), 1.0, 1e-9);
  }
}

TEST(Affiliated, RequiresSymmetricSet) {
  const CellArray y = counts_of(2, 2, {1, 2, 3, 4});
  EXPECT_THROW(mle_affiliated(y, generate(2, 2, ConstraintMode::kAdjacent, false)), Error);
  EXPECT_THROW(mle_affiliated(y, generate(3, 2, ConstraintMode::kAdjacent, true)), Error);
}

}  // namespace
}  // namespace affiltest
