#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmw/harness.hpp"

using namespace dmw;
using namespace dmw::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dmw_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

int cli(const std::string& args) {
  const int rc = std::system((std::string(DMW_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json base() { return json::parse(R"({"grid": {"p": 1, "N": 4}, "weight": {"d": 2}})"); }

std::string curve_text(const std::vector<std::pair<double, double>>& xy, const std::string& op = "martingale") {
  std::vector<CurveRow> rows;
  for (auto [x, y] : xy) {
    CurveRow r;
    r.X = x;
    r.norm = y;
    r.op = op;
    r.k = 1;
    rows.push_back(r);
  }
  return curve_csv(rows);
}

}  // namespace

TEST(Config, A2OfIdentityIsOne) {
  const auto r = run(parse_config("a2", base()));
  ASSERT_EQ(r.code, kOk);
  const auto rep = json::parse(r.files.at("report.json"));
  EXPECT_DOUBLE_EQ(rep.at("a2").get<double>(), 1.0);
  EXPECT_EQ(r.manifest.at("outputs").size(), 1u);
}

TEST(Config, StrictSchema) {
  auto c = base();
  c["grid"]["levels"] = 3;
  EXPECT_THROW(parse_config("a2", c), ValidationError);
  c = base();
  c["extra"] = true;
  EXPECT_THROW(parse_config("a2", c), ValidationError);
  c = base();
  c["grid"]["N"] = 4.5;
  EXPECT_THROW(parse_config("a2", c), ValidationError);
  c = base();
  c["weight"]["kind"] = "mystery";
  EXPECT_THROW(parse_config("a2", c), ValidationError);
  c = base();
  c["goodness"] = {{"delta", 2.0}};
  EXPECT_THROW(parse_config("a2", c), ValidationError);
  c = base();
  c["operator"] = {{"type", "kernel"}, {"kernel", "nope"}};
  EXPECT_THROW(parse_config("normest", c), ValidationError);
  c = base();
  c["operator"] = {{"type", "kernel"}, {"params", {{"twsit", 1.0}}}};
  EXPECT_THROW(parse_config("normest", c), ValidationError);
  EXPECT_THROW(parse_config("dance", base()), ValidationError);
  c = base();
  c["task"] = "bmo";
  EXPECT_THROW(parse_config("a2", c), ValidationError);
  c = base();
  c["grid"]["N"] = 30;
  EXPECT_THROW(parse_config("a2", c), ValidationError);
}

TEST(Config, SeedOverrideIsRecorded) {
  const auto c = parse_config("a2", base(), 77);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.normalized.at("seed").get<std::uint64_t>(), 77u);
}

TEST(Config, ShortSeparationIsRejectedBeforeSampling) {
  auto c = json::parse(R"({"grid": {"p": 1, "N": 6}, "weight": {"d": 1},
                           "operator": {"type": "kernel"}, "goodness": {"r": 2}})");
  EXPECT_THROW(parse_config("expansion", c), ValidationError);
  c["goodness"]["r"] = 9;
  EXPECT_NO_THROW(parse_config("expansion", c));
  c["operator"]["type"] = "shift";
  EXPECT_THROW(parse_config("expansion", c), ValidationError);
}

TEST(Run, VerifySuitePassesQuickly) {
  auto c = base();
  c["weight"]["kind"] = "rotating";
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(parse_config("verify", c));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.code, kOk) << r.message << "\n" << r.files.at("verify.csv");
  EXPECT_LT(secs, 60.0);
}

TEST(Run, NumericalAndAssertionCodes) {
  auto c = base();
  c["operator"] = {{"type", "shift"}, {"m", 1}, {"n", 1}};
  c["tolerances"] = {{"max_iter", 1}, {"restarts", 1}};
  const auto r = run(parse_config("normest", c));
  EXPECT_EQ(r.code, kNumerical);
  EXPECT_FALSE(r.files.empty());

  c = base();
  c["operator"] = {{"type", "shift"}, {"m", 1}, {"n", 0}};
  c["tolerances"] = {{"identity", 1e-40}};
  c["slice"] = {{"instances", 2}};
  EXPECT_EQ(run(parse_config("slice-check", c)).code, kAssertion);
}

TEST(Run, ThreadCountDoesNotChangeBytes) {
  auto c = json::parse(R"({"grid": {"p": 1, "N": 5}, "weight": {"d": 2, "kind": "rotating"},
                           "sweep": {"X": [2, 4], "sigma_samples": 3, "ainf_directions": 8}})");
  const auto cfg = parse_config("sweep", c);
  const auto a = run(cfg, 1, true), b = run(cfg, 3, true);
  ASSERT_EQ(a.code, kOk);
  EXPECT_EQ(a.files, b.files);
  EXPECT_TRUE(a.files.count("fit.csv"));
  EXPECT_EQ(a.files.at("curve.csv").substr(0, a.files.at("curve.csv").find('\n')),
            "X,Xinf,norm,operator,k,seed,converged");
}

TEST(Replay, ReproducesAndDetectsTampering) {
  auto c = json::parse(R"({"grid": {"p": 1, "N": 5}, "weight": {"d": 2, "kind": "rotating", "target": 3},
                           "sweep": {"study": "complexity", "k": [1, 2], "trials": 2}})");
  const auto r = run(parse_config("sweep", c));
  ASSERT_EQ(r.code, kOk);
  const auto again = replay(r.manifest);
  EXPECT_EQ(again.code, kOk) << again.message;
  EXPECT_EQ(again.files, r.files);
  auto bad = r.manifest;
  bad["outputs"]["curve.csv"] = "0000000000000000";
  EXPECT_EQ(replay(bad).code, kAssertion);
}

TEST(Report, SingleRowIsInsufficient) {
  const auto rows = report_bounds({curve_text({{2.0, 3.0}})});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].fit.insufficient);
}

TEST(Report, PlantedExponent) {
  std::vector<std::pair<double, double>> xy;
  for (int i = 0; i < 6; ++i) {
    const double x = std::pow(2.0, i);
    xy.push_back({x, 1.7 * x * (1.0 + 0.003 * ((i % 2) ? 1 : -1))});
  }
  const auto rows = report_bounds({curve_text(xy)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].fit.slope, 1.0, 0.01);
  EXPECT_EQ(rows[0].variable, "X");
  EXPECT_NE(bounds_csv(rows).find("martingale,X,6,"), std::string::npos);
}

TEST(Report, DisjointRangesMerge) {
  std::vector<std::pair<double, double>> lo, hi;
  for (int i = 0; i < 4; ++i) lo.push_back({1.0 + i, std::pow(1.0 + i, 1.25)});
  for (int i = 0; i < 4; ++i) hi.push_back({10.0 + i, std::pow(10.0 + i, 1.25)});
  const double a = report_bounds({curve_text(lo)})[0].fit.slope;
  const double b = report_bounds({curve_text(hi)})[0].fit.slope;
  const double m = report_bounds({curve_text(lo), curve_text(hi)})[0].fit.slope;
  EXPECT_NEAR(a, 1.25, 1e-12);
  EXPECT_NEAR(b, 1.25, 1e-12);
  EXPECT_NEAR(m, 1.25, 1e-12);
  // operators stay separate
  EXPECT_EQ(report_bounds({curve_text(lo), curve_text(hi, "shift")}).size(), 2u);
}

TEST(Report, InconsistentHeaderRejected) {
  EXPECT_THROW(report_bounds({"X,norm\n1,2\n"}), ValidationError);
  EXPECT_THROW(report_bounds({curve_text({{1, 1}}) + "1,2,3\n"}), ValidationError);
}

TEST(Cli, ExitCodesAndOutputs) {
  const fs::path dir = scratch("cli");
  put(dir / "a2.json", base().dump());
  EXPECT_EQ(cli("a2 --config " + (dir / "a2.json").string() + " --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "ok" / "manifest.json"));

  auto bad = base();
  bad["weight"]["colour"] = "red";
  put(dir / "bad.json", bad.dump());
  EXPECT_EQ(cli("a2 --config " + (dir / "bad.json").string() + " --out " + (dir / "bad").string()), kValidation);
  EXPECT_FALSE(fs::exists(dir / "bad"));
  EXPECT_EQ(cli("a2 --config " + (dir / "missing.json").string() + " --out " + (dir / "m").string()), kValidation);
  EXPECT_EQ(cli("a2 --out " + (dir / "m").string()), kValidation);
  EXPECT_FALSE(fs::exists(dir / "m"));
}

TEST(Cli, EnvironmentOverridesAndReplay) {
  const fs::path dir = scratch("env");
  auto c = json::parse(R"({"grid": {"p": 1, "N": 4}, "weight": {"d": 2, "kind": "rotating"},
                           "sweep": {"X": [2, 3], "sigma_samples": 2, "ainf_directions": 8}})");
  put(dir / "s.json", c.dump());
  const std::string env = "DMW_OUT=" + (dir / "envout").string() + " DMW_THREADS=2 ";
  const int rc = std::system((env + DMW_CLI_PATH + " sweep --config " + (dir / "s.json").string() +
                              " --seed 5 > /dev/null 2>&1").c_str());
  ASSERT_EQ(WEXITSTATUS(rc), 0);
  ASSERT_TRUE(fs::exists(dir / "envout" / "curve.csv"));
  const auto m = json::parse(slurp(dir / "envout" / "manifest.json"));
  EXPECT_EQ(m.at("threads").get<int>(), 2);
  EXPECT_EQ(m.at("seeds").at("root").get<std::uint64_t>(), 5u);
  EXPECT_EQ(cli("replay --manifest " + (dir / "envout" / "manifest.json").string() + " --out " +
                (dir / "replayed").string()),
            0);
  EXPECT_EQ(slurp(dir / "envout" / "curve.csv"), slurp(dir / "replayed" / "curve.csv"));

  EXPECT_EQ(cli("report --curves " + (dir / "envout" / "curve.csv").string() + " --out " + (dir / "rep").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "rep" / "bounds.csv"));
  put(dir / "junk.csv", "a,b\n1,2\n");
  EXPECT_EQ(cli("report --curves " + (dir / "junk.csv").string() + " --out " + (dir / "rep2").string()),
            kValidation);
}
