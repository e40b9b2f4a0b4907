#include <gtest/gtest.h>

#include <json.hpp>

#include "affiltest/error.hpp"
#include "affiltest/inference.hpp"

namespace affiltest {
namespace {

TestReport sample_report() {
  const CellArray y(GridSpec::equispaced(3, 2), CellKind::kCounts, {12, 8, 3, 8, 20, 9, 3, 9, 28});
  TestOptions opts;
  opts.draws = 4000;
  return run_test(y, opts);
}

TEST(Report, JsonRoundTrip) {
  const TestReport r = sample_report();
  const TestReport back = report_from_json(to_json(r));
  EXPECT_EQ(back.intervals, 3);
  EXPECT_EQ(back.bidders, 2);
  EXPECT_EQ(back.breakpoints, r.breakpoints);
  EXPECT_EQ(back.num_orbits, 6u);
  EXPECT_DOUBLE_EQ(back.loglik_affiliated, r.loglik_affiliated);
  EXPECT_DOUBLE_EQ(back.lr_stat, r.lr_stat);
  EXPECT_EQ(back.j, r.j);
  EXPECT_EQ(back.weights, r.weights);
  EXPECT_DOUBLE_EQ(back.pvalue, r.pvalue);
  EXPECT_EQ(back.decision, r.decision);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.constraint_mode, r.constraint_mode);
  EXPECT_EQ(back.affiliated_orbit_masses, r.affiliated_orbit_masses);
  EXPECT_EQ(to_json(back), to_json(r));
}

TEST(Report, SchemaKeys) {
  const auto j = nlohmann::json::parse(to_json(sample_report()));
  for (const char* key :
       {"grid", "loglik_unconstrained", "loglik_symmetric", "loglik_affiliated",
        "loglik_independent", "loglik_center", "lr_stat", "j", "active_constraints", "weights",
        "pvalue", "sizes", "kp_lower", "kp_upper", "decision", "seed", "options", "solver"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["grid"]["cells"], 9);
  EXPECT_EQ(j["weights"].size(), j["j"].get<std::size_t>() + 1);
  EXPECT_EQ(j["decision"].size(), j["sizes"].size());
}

TEST(Report, WithoutWeightsPvalueIsNull) {
  const CellArray y(GridSpec::equispaced(2, 2), CellKind::kCounts, {20, 30, 30, 20});
  TestOptions opts;
  opts.compute_weights = false;
  const TestReport r = run_test(y, opts);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_TRUE(j["pvalue"].is_null());
  EXPECT_FALSE(report_from_json(to_json(r)).weights_computed);
}

TEST(Report, MalformedJsonThrowsFormat) {
  try {
    report_from_json("{\"grid\": 3}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
  EXPECT_THROW(report_from_json("not json"), Error);
}

TEST(Report, TextSummaryMentionsDecisions) {
  const std::string s = text_summary(sample_report());
  EXPECT_NE(s.find("LR"), std::string::npos);
  EXPECT_NE(s.find("0.05"), std::string::npos);
}

}  // namespace
}  // namespace affiltest
