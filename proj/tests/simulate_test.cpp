#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "affiltest/affiliation.hpp"
#include "affiltest/error.hpp"
#include "affiltest/simulate.hpp"

namespace affiltest {
namespace {

long line_count(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

TEST(Sample, DeterministicAndInsideCells) {
  const Dgp d = affiliated_2x2(0.2);
  const auto a = sample(d, 500, 7);
  const auto b = sample(d, 500, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample(d, 500, 8));
  for (const auto& t : a) {
    ASSERT_EQ(t.size(), 2u);
    for (double u : t) EXPECT_TRUE(u > 0.0 && u <= 1.0);
  }
}

TEST(Sample, FrequenciesMatchMasses) {
  const Dgp d = violating_2x2(0.1);
  const auto tuples = sample(d, 40000, 3);
  const CellArray c = count_cells(tuples, d.masses.grid());
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = d.masses[i];
    EXPECT_NEAR(c[i] / 40000.0, p, 5 * std::sqrt(p * (1 - p) / 40000.0));
  }
}

TEST(Dgps, CatalogProperties) {
  const Dgp a = affiliated_2x2(0.2);
  EXPECT_NEAR(a.masses[0] * a.masses[3] - a.masses[1] * a.masses[2], 0.2, 1e-12);
  const Dgp v = violating_2x2(0.1);
  EXPECT_NEAR(v.masses[1] * v.masses[2] - v.masses[0] * v.masses[3], 0.1, 1e-12);
  EXPECT_THROW(violating_2x2(0.3), Error);
  for (const Dgp& d : builtin_dgps()) {
    EXPECT_NEAR(d.masses.total(), 1.0, 1e-12) << d.label;
  }
  const Dgp s = independent_skewed_dgp(3, 2, 0.6);
  EXPECT_NEAR(s.masses[0] * s.masses[4], s.masses[1] * s.masses[3], 1e-15);
  EXPECT_THROW(make_dgp("nope", 2, 2, std::nullopt), Error);
  EXPECT_EQ(make_dgp("uniform", 3, 2, std::nullopt).masses.size(), 9u);
}

TEST(Dgps, DiscretizedDensityIsTp2) {
  for (int k = 2; k <= 5; ++k) {
    const Dgp d = affiliated_density_dgp(k, 2, 2.0);
    const auto cs = generate(k, 2, ConstraintMode::kFull, false);
    for (double r : residuals(d.masses, cs)) EXPECT_GE(r, -1e-10);
  }
  const Dgp d3 = affiliated_density_dgp(3, 3, 2.0);
  const auto cs3 = generate(3, 3, ConstraintMode::kFull, false);
  for (double r : residuals(d3.masses, cs3)) EXPECT_GE(r, -1e-10);
}

TEST(Mc, ThreadInvariantAndReproducible) {
  McOptions opts;
  opts.sample_size = 200;
  opts.replications = 12;
  opts.seed = 5;
  opts.test.draws = 2000;
  const Dgp d = uniform_dgp(2, 2);
  const McResult a = mc_study(d, opts);
  opts.threads = 3;
  const McResult b = mc_study(d, opts);
  ASSERT_EQ(a.rows.size(), 12u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].seed, b.rows[i].seed);
    EXPECT_EQ(a.rows[i].lr_stat, b.rows[i].lr_stat);
    EXPECT_EQ(a.rows[i].pvalue, b.rows[i].pvalue);
  }
  EXPECT_EQ(a.rate_kp_upper, b.rate_kp_upper);
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Mc, ViolatingDgpRejects) {
  McOptions opts;
  opts.sample_size = 1000;
  opts.replications = 10;
  opts.test.draws = 2000;
  const McResult r = mc_study(violating_2x2(0.1), opts);
  EXPECT_GE(r.rate_pvalue[1], 0.9);
  EXPECT_GE(r.rate_kp_lower[1], r.rate_kp_upper[1]);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["replications"], 10);
}

TEST(Mc, AnalysisGridOverride) {
  McOptions opts;
  opts.sample_size = 300;
  opts.replications = 3;
  opts.test.compute_weights = false;
  opts.analysis_grid = GridSpec::equispaced(3, 2);
  const McResult r = mc_study(affiliated_density_dgp(4, 2, 2.0), opts);
  EXPECT_EQ(r.rows.size(), 3u);
  std::ostringstream os;
  write_csv(os, r);
  EXPECT_EQ(line_count(os.str()), 4);
}

}  // namespace
}  // namespace affiltest
