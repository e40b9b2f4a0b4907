#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "affiltest/error.hpp"
#include "affiltest_cli/cli.hpp"

namespace affiltest::cli {
namespace {

namespace fs = std::filesystem;

const fs::path kData = AFFILTEST_TESTDATA;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("affiltest_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "affiltest");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int system_exit(const std::string& args) {
  const std::string cmd = std::string("\"") + AFFILTEST_EXE + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_synthetic(const fs::path& path, const Dgp& dgp, std::size_t auctions, std::uint64_t seed) {
  std::ofstream os(path);
  write_bids_csv(os, synthesize_auctions(dgp, auctions, seed));
}

std::set<std::string> key_paths(const nlohmann::json& j, const std::string& prefix = "") {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) {
    const std::string p = prefix.empty() ? k : prefix + "." + k;
    out.insert(p);
    if (v.is_object()) {
      const auto sub = key_paths(v, p);
      out.insert(sub.begin(), sub.end());
    }
  }
  return out;
}

TEST(Ingest, GroupsAndFiltersByBidderCount) {
  std::ostringstream log;
  const BidTable t = ingest(kData / "bids_small.csv", 3, &log);
  EXPECT_EQ(t.rows, 8u);
  ASSERT_EQ(t.auctions.size(), 2u);
  EXPECT_EQ(t.dropped, 1u);
  EXPECT_EQ(t.auctions[0].auction_id, "A1");
  EXPECT_EQ(t.auctions[1].auction_id, "C3");
  EXPECT_EQ(t.auctions[1].bids, (std::vector<double>{100, 120, 95}));
  EXPECT_NE(log.str().find("1 dropped"), std::string::npos);
  EXPECT_EQ(ingest(kData / "bids_small.csv", 0).auctions.size(), 3u);
}

TEST(Ingest, MissingHeaderIsFormatError) {
  try {
    ingest(kData / "no_header.csv", 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST(Ingest, MalformedRowReportsLine) {
  std::istringstream in("auction_id,bid,engineer_estimate\nA,1,2\nA,x,2\n");
  try {
    ingest(in, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream neg("auction_id,bid,engineer_estimate\nA,-1,2\n");
  try {
    ingest(neg, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  std::istringstream two("auction_id,bid,engineer_estimate\nA,1,2,3\n");
  EXPECT_THROW(ingest(two, 0), Error);
}

TEST(Ingest, ThreeBidderSampleSize) {
  const fs::path dir = scratch("ingest278");
  write_synthetic(dir / "bids.csv", uniform_dgp(2, 3), 278, 1);
  const BidTable t = ingest(dir / "bids.csv", 3);
  EXPECT_EQ(t.rows, 834u);
  EXPECT_EQ(t.auctions.size(), 278u);
  for (const auto& a : t.auctions) EXPECT_EQ(a.bids.size(), 3u);
}

TEST(Summary, WinningBidIsLowest) {
  std::vector<AuctionRecord> recs{{"a", 15, {10, 20, 30}}};
  const Summary s = summarize(recs);
  EXPECT_EQ(s.winning_bid.mean, 10.0);
  EXPECT_EQ(s.bids.median, 20.0);
  EXPECT_EQ(s.bids.sd, 10.0);
  const Summary c = summarize(std::vector<AuctionRecord>{{"a", 1, {5, 5}}, {"b", 1, {5, 5}}});
  EXPECT_EQ(c.bids.sd, 0.0);
  EXPECT_NE(format_summary(s).find("winning bid"), std::string::npos);
}

TEST(Config, JsonAndValidation) {
  const Config c = load_config(kData / "config_basic.json");
  EXPECT_EQ(c.bidders, 2);
  EXPECT_EQ(c.draws, 20000);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(config_from_json(to_json(c)).draws, 20000);
  try {
    config_from_json("{\"bogus\": 1}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
  Config bad = c;
  bad.sizes = {1.5};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.breakpoints = {0.0, 0.7, 0.3, 1.0};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Cli, EndToEndOnAffiliatedData) {
  const fs::path dir = scratch("e2e");
  write_synthetic(dir / "bids.csv", affiliated_2x2(0.2), 400, 3);
  const auto r = invoke({"test-affiliation", "-c", (kData / "config_basic.json").string(), "-i",
                         (dir / "bids.csv").string(), "-o", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"report.json", "summary.txt", "scatter.csv", "curves.csv", "residuals.csv", "run.log"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const TestReport rep = report_from_json(slurp(dir / "out" / "report.json"));
  EXPECT_EQ(rep.sample_size, 400.0);
  EXPECT_EQ(rep.decision[1], Decision::kFailToReject);
  const std::string log = slurp(dir / "out" / "run.log");
  for (const char* needle : {"affiltest 0.", "config: {", "seed: 7", "J: 1", "constraint mode: adjacent"}) {
    EXPECT_NE(log.find(needle), std::string::npos) << needle;
  }
}

TEST(Cli, ReportSchemaMatchesGolden) {
  const fs::path dir = scratch("schema");
  write_synthetic(dir / "bids.csv", uniform_dgp(3, 2), 300, 4);
  const auto r = invoke({"test-affiliation", "-c", (kData / "config_basic.json").string(), "-i",
                         (dir / "bids.csv").string(), "-k", "3", "-o", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto keys = key_paths(nlohmann::json::parse(slurp(dir / "out" / "report.json")));
  std::istringstream golden(slurp(kData / "report_schema.golden"));
  std::set<std::string> expected;
  for (std::string line; std::getline(golden, line);)
    if (!line.empty()) expected.insert(line);
  EXPECT_EQ(keys, expected);
}

TEST(Cli, NonEquispacedGridIsNoted) {
  const fs::path dir = scratch("noneq");
  write_synthetic(dir / "bids.csv", uniform_dgp(2, 3), 278, 5);
  const auto r = invoke({"test-affiliation", "-i", (dir / "bids.csv").string(), "-N", "3",
                         "--breakpoints", "0", "0.4", "0.6", "1", "--draws", "5000", "-o",
                         (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string s = slurp(dir / "out" / "summary.txt");
  EXPECT_NE(s.find("Non-equispaced"), std::string::npos);
  EXPECT_NE(s.find("adding-up"), std::string::npos);
  EXPECT_NE(s.find("278 auctions"), std::string::npos);
}

TEST(Cli, MissingInputExitsTwoWithPath) {
  const auto r = invoke({"test-affiliation", "-i", "/nonexistent/bids.csv", "-o",
                         scratch("missing").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/bids.csv"), std::string::npos);
  EXPECT_EQ(system_exit("test-affiliation -i /nonexistent/bids.csv -o " + scratch("missing2").string()), 2);
  EXPECT_EQ(system_exit("no-such-command"), 2);
  EXPECT_EQ(system_exit("--version"), 0);
}

TEST(Cli, SimulateWritesRowsAndIsReproducible) {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const std::string cfg = (kData / "config_basic.json").string();
  ASSERT_EQ(invoke({"simulate", "-c", cfg, "-o", a.string()}).code, 0);
  ASSERT_EQ(invoke({"simulate", "-c", cfg, "-o", b.string(), "--threads", "2"}).code, 0);
  const std::string csv = slurp(a / "mc.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  EXPECT_EQ(csv, slurp(b / "mc.csv"));
  EXPECT_EQ(slurp(a / "mc.json"), slurp(b / "mc.json"));
}

TEST(Cli, InvalidSizeIsConfigError) {
  const auto r = invoke({"simulate", "-c", (kData / "config_basic.json").string(), "--sizes", "1.5",
                         "-o", scratch("badsize").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("outside (0, 1)"), std::string::npos);
}

TEST(Cli, WeightsAndConstraints) {
  const auto w = invoke({"weights", "--identity", "2", "--draws", "20000", "--stat", "2.7055"});
  ASSERT_EQ(w.code, 0) << w.err;
  const auto j = nlohmann::json::parse(w.out);
  EXPECT_EQ(j["weights"].size(), 3u);
  EXPECT_NEAR(j["weights"][1].get<double>(), 0.5, 0.02);
  const auto c = invoke({"constraints", "-k", "3", "-N", "2"});
  ASSERT_EQ(c.code, 0);
  EXPECT_NE(c.out.find("J=3"), std::string::npos);
  const auto full = invoke({"constraints", "-k", "3", "-N", "2", "--mode", "full", "--cells"});
  EXPECT_NE(full.out.find("J=9"), std::string::npos);
  EXPECT_EQ(invoke({"constraints", "--mode", "sideways"}).code, 2);
}

TEST(Cli, SummaryAndHetero) {
  const auto s = invoke({"summary", "-i", (kData / "bids_small.csv").string(), "-N", "3"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("auctions: 2"), std::string::npos);
  const fs::path dir = scratch("hetero");
  write_synthetic(dir / "bids.csv", uniform_dgp(2, 2), 100, 9);
  const auto h = invoke({"fit-hetero", "-i", (dir / "bids.csv").string(), "-N", "2", "-o",
                         (dir / "out").string()});
  ASSERT_EQ(h.code, 0) << h.err;
  const auto j = nlohmann::json::parse(h.out);
  EXPECT_NEAR(j["ls"]["slope"].get<double>(), 1.02, 0.05);
  EXPECT_TRUE(fs::exists(dir / "out" / "curves.csv"));
}

TEST(Cli, EmitBidsRoundTrips) {
  const fs::path dir = scratch("emit");
  const auto r = invoke({"simulate", "--dgp", "violating-2x2", "-N", "2", "-T", "50", "--emit-bids",
                         (dir / "b.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ingest(dir / "b.csv", 2).auctions.size(), 50u);
}

}  // namespace
}  // namespace affiltest::cli
