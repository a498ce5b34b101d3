#include "tdscope/tdscope.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tdscope;

namespace {

const std::string kSmall = std::string(TDSCOPE_CONFIG_DIR) + "/sign_small.ini";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string small_text() { return slurp(kSmall); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tdscope_harness_" + name);
  fs::remove_all(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + TDSCOPE_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, ParsesShippedConfigs) {
  for (const auto& e : fs::directory_iterator(TDSCOPE_CONFIG_DIR)) {
    if (e.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(parse_config(e.path())) << e.path();
  }
  const auto c = parse_config(kSmall);
  EXPECT_EQ(c.study, "sign");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.source_radius, 5.0);
  EXPECT_DOUBLE_EQ(c.measurement_radius, 5.0);
  EXPECT_DOUBLE_EQ(c.h_or_default(), 0.125);
}

TEST(Config, RejectsBadInput) {
  const std::string base = small_text();
  auto bad = [&](const std::string& extra) { return parse_config_text(base + "\n" + extra); };
  EXPECT_THROW(bad("[bogus]\nx = 1"), ConfigError);
  EXPECT_THROW(bad("[kernel]\nunknown_key = 1"), ConfigError);
  EXPECT_THROW(bad("[tolerances]\nslope_lo = 1"), ConfigError);  // not a sign check
  EXPECT_THROW(bad("[vie]\nthreads = 0"), ConfigError);
  EXPECT_THROW(bad("[kernel]\nmode = magic"), ConfigError);
  EXPECT_THROW(parse_config_text("[study]\ntype = nope\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[study]\ntype = sign\n[background]\nA = 1 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[study]\ntype = sign\n[background]\nA = 1 -1 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[study]\ntype = static\n[background]\nkappa = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("/nonexistent/x.ini"), IoError);
  // the scatterer must lie inside both spheres
  std::string small_sphere = base;
  small_sphere.replace(small_sphere.find("radius = 5"), 10, "radius = 0.4");
  EXPECT_THROW(parse_config_text(small_sphere), ConfigError);
}

TEST(Report, KeyOrderAndCsvLayout) {
  const StudyReport r = run_study(parse_config(kSmall));
  const auto j = report_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  const std::vector<std::string> want{"tool", "version", "study", "name", "status", "config", "dimensionless",
                                      "tolerance_overrides", "checks", "results", "outputs"};
  EXPECT_EQ(keys, want);
  EXPECT_EQ(j["status"], "PASS");
  ASSERT_TRUE(r.map.has_value());
  std::ostringstream os;
  write_td_csv(os, *r.map);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("x,y,z,T,inside_B\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 126);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  // row-major: z varies fastest
  EXPECT_EQ(r.map->points[1](2) - r.map->points[0](2), 0.5);
  EXPECT_EQ(r.map->points[1](0), r.map->points[0](0));
}

TEST(Report, EmitOutputsIsDeterministic) {
  const ExperimentConfig cfg = parse_config(kSmall);
  const fs::path a = scratch("a"), b = scratch("b");
  const auto fa = emit_outputs(run_study(cfg), a);
  const auto fb = emit_outputs(run_study(cfg), b);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_EQ(slurp(fa[i]), slurp(fb[i])) << fa[i];
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Report, ShortestRoundTripFloats) {
  EXPECT_EQ(detail::fmt_double(0.1), "0.1");
  EXPECT_EQ(detail::fmt_double(-2.5e-300), "-2.5e-300");
  EXPECT_EQ(detail::fmt_double(1.0), "1");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(detail::fmt_double(x)), x);
}

TEST(Report, ToleranceOverrideIsRecordedAndCertificateFailureIsInconclusive) {
  const ExperimentConfig cfg = parse_config_text(small_text() + "\n[tolerances]\ncertificate = 0.01\n");
  const StudyReport r = run_study(cfg);
  const Check* c = r.find("certificate");
  ASSERT_NE(c, nullptr);
  EXPECT_TRUE(c->overridden);
  EXPECT_EQ(c->status, Status::INCONCLUSIVE);
  EXPECT_EQ(r.find("sign_tally")->status, Status::INCONCLUSIVE);
  EXPECT_EQ(r.status(), Status::INCONCLUSIVE);
  EXPECT_EQ(r.overrides["certificate"]["default"], 0.999);
  EXPECT_EQ(r.overrides["certificate"]["value"], 0.01);
}

TEST(Report, ZeroContrastIsNeutral) {
  std::string t = small_text();
  t.replace(t.find("a_tilde = 2"), 11, "a_tilde = 1");
  const StudyReport r = run_study(parse_config_text(t));
  EXPECT_EQ(r.status(), Status::NEUTRAL);
  EXPECT_EQ(exit_code(r.status()), 0);
  for (double v : r.map->values) EXPECT_EQ(v, 0.0);
}

TEST(Report, StatusPrecedenceAndExitCodes) {
  StudyReport r;
  std::map<std::string, double> tol;
  CheckBook book(r, tol);
  book.less("a", 1.0, 2.0);
  EXPECT_EQ(r.status(), Status::PASS);
  book.within("b", 5.0, 0.0, 1.0).status = Status::INCONCLUSIVE;
  EXPECT_EQ(r.status(), Status::INCONCLUSIVE);
  book.greater("c", 0.0, 1.0);
  EXPECT_EQ(r.status(), Status::FAIL);
  EXPECT_EQ(exit_code(Status::PASS), 0);
  EXPECT_EQ(exit_code(Status::FAIL), 2);
  EXPECT_EQ(exit_code(Status::INCONCLUSIVE), 3);
  // strict and non-strict bounds
  EXPECT_FALSE(book.less("d", 1.0, 1.0).passed());
  EXPECT_TRUE(book.less("e", 1.0, 1.0, false).passed());
}

TEST(Harness, FitLine) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, -1, -3, -5};
  const auto [s, se] = detail::fit_line(x, y);
  EXPECT_DOUBLE_EQ(s, -2.0);
  EXPECT_NEAR(se, 0.0, 1e-15);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("validate \"" + kSmall + "\""), 0);
  EXPECT_EQ(cli("validate /nonexistent.ini"), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  const fs::path out = scratch("cli");
  EXPECT_EQ(cli("run \"" + std::string(TDSCOPE_CONFIG_DIR) + "/oracle_degraded.ini\" --out \"" + out.string() + "\""), 2);
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_EQ(cli("run \"" + kSmall + "\" --threads 0 --out \"" + out.string() + "\""), 1);
  fs::remove_all(out);
}

TEST(Cli, SeedOverridesConfig) {
  const fs::path out = scratch("seed");
  ASSERT_EQ(cli("run \"" + kSmall + "\" --seed 42 --out \"" + out.string() + "\""), 0);
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(j["config"]["seed"], 42);
  fs::remove_all(out);
}
