#include "lieflow/cli/commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lieflow;
using namespace lieflow::cli;
namespace fs = std::filesystem;

namespace {

std::string scenario_path(const std::string& name) { return std::string(LIEFLOW_SCENARIO_DIR) + "/" + name; }

json minimal() {
  return json::parse(R"({"group": {"name": "Heisenberg3"}, "system": {"drift": {"invariant": [1, 0, 0]}}})");
}

std::string error_of(const json& j) {
  try {
    parse_scenario(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("lieflow_test_" + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Parse, Minimal) {
  const Scenario s = parse_scenario(minimal());
  EXPECT_EQ(s.group, "Heisenberg3");
  EXPECT_TRUE(s.controls.empty());
  EXPECT_EQ(s.drift.invariant(0), 1.0);
  EXPECT_TRUE(s.drift.derivation.isZero(0.0));
}

TEST(Parse, UnknownKeysNamePath) {
  json j = minimal();
  j["bogus"] = 1;
  EXPECT_NE(error_of(j).find("bogus: unknown field"), std::string::npos);
  j = minimal();
  j["probe"] = {{"tau", 1.0}, {"sample", 10}};
  EXPECT_NE(error_of(j).find("probe.sample"), std::string::npos);
}

TEST(Parse, BadValuesNamePath) {
  json j = minimal();
  j["system"]["drift"]["derivation"] = {{1, 0}, {0, 1}};
  EXPECT_NE(error_of(j).find("system.drift.derivation"), std::string::npos);
  j = minimal();
  j["dt"] = -1.0;
  EXPECT_NE(error_of(j).find("dt"), std::string::npos);
  j = minimal();
  j["group"]["name"] = "E8";
  EXPECT_NE(error_of(j).find("group.name"), std::string::npos);
  j = minimal();
  j["group"]["name"] = "Rn";
  EXPECT_NE(error_of(j).find("group.params.n"), std::string::npos);
  j = minimal();
  j["system"]["controls"] = json::array({{{"invariant", {0, 1, 0}}}});
  j["control_law"] = {{"durations", {1.0}}, {"values", {{1.0, 2.0}}}};
  EXPECT_NE(error_of(j).find("control_law.values[0]"), std::string::npos);
}

TEST(Parse, SyntaxErrorReportsLine) {
  const fs::path dir = fresh_dir("syntax");
  fs::create_directories(dir);
  const fs::path file = dir / "broken.json";
  std::ofstream(file) << "{\n  \"group\": {\"name\": \"SO3\"},\n  \"system\": {,}\n}\n";
  try {
    load_scenario(file.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Parse, ShippedInvalidScenario) {
  EXPECT_THROW(load_scenario(scenario_path("invalid/bad_dimension.json")), ConfigError);
  EXPECT_THROW(load_scenario(scenario_path("does_not_exist.json")), ConfigError);
}

TEST(Parse, ShippedScenariosBuild) {
  for (const char* name : {"heisenberg_linear.json", "heisenberg_symmetric.json", "heisenberg_noninner.json",
                           "heisenberg_mixed.json", "so3_bilinear.json", "so3_saturation.json", "rn_bilinear.json",
                           "rn_abelian.json", "sl2_bilinear.json", "affplus_non_nilpotent.json",
                           "gl2_left_invariant.json"}) {
    const Scenario s = load_scenario(scenario_path(name));
    EXPECT_NO_THROW(build_model(s)) << name;
  }
}

TEST(Parse, Overrides) {
  const Scenario s = with_overrides(parse_scenario(minimal()), 42u, 10.0);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.probe.seed, 42u);
  EXPECT_DOUBLE_EQ(s.tol.alg, 10.0 * Tolerances{}.alg);
  EXPECT_THROW(with_overrides(s, std::nullopt, 0.0), ConfigError);
}

TEST(Commands, SimulateHeisenbergTerminal) {
  const Scenario s = load_scenario(scenario_path("heisenberg_linear.json"));
  const RunSummary r = run_simulate(s, fresh_dir("sim"));
  EXPECT_TRUE(r.all_passed());
  const std::vector<double> expected{1, 2, 4, 0, 1, 2, 0, 0, 1};
  ASSERT_EQ(r.details["terminal"].size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_NEAR(r.details["terminal"][i].get<double>(), expected[i], 1e-12) << i;
  EXPECT_EQ(r.artifacts.size(), 3u);
}

TEST(Commands, VerifyRejectsCorruptedAlgebra) {
  const Scenario s = load_scenario(scenario_path("corrupted_algebra.json"));
  const RunSummary r = run_verify(s, fresh_dir("bad"));
  EXPECT_FALSE(r.all_passed());
  bool jacobi_failed = false;
  for (const auto& c : r.checks) jacobi_failed = jacobi_failed || (c.name == "jacobi" && !c.passed);
  EXPECT_TRUE(jacobi_failed);
}

TEST(Commands, VerifyPassesOnRn) {
  const Scenario s = load_scenario(scenario_path("rn_abelian.json"));
  const RunSummary r = run_verify(s, fresh_dir("rn"));
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.residual;
}

TEST(Commands, AnalyzeWritesReport) {
  const Scenario s = load_scenario(scenario_path("heisenberg_symmetric.json"));
  const fs::path dir = fresh_dir("analyze");
  const RunSummary r = run_analyze(s, dir);
  EXPECT_TRUE(r.all_passed());
  const json report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["larc"]["generated_dim"].get<int>(), 3);
  EXPECT_EQ(report["verdict"]["theorem_tag"].get<std::string>(), "nilpotent_cor");
  EXPECT_TRUE(report["verdict"]["controllable"].get<bool>());
}

TEST(Commands, ReachWritesClouds) {
  Scenario s = load_scenario(scenario_path("so3_bilinear.json"));
  s.probe.samples = 200;
  s.saturation.reset();
  const fs::path dir = fresh_dir("reach");
  const RunSummary r = run_reach(s, dir);
  EXPECT_TRUE(r.all_passed());
  EXPECT_TRUE(fs::exists(dir / "cloud_fwd.csv"));
  EXPECT_TRUE(fs::exists(dir / "cloud_bwd.csv"));
  const json report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["draws"].get<int>(), 200);
}

TEST(Commands, UnknownCommand) {
  std::ostringstream log;
  EXPECT_THROW(run_command("fly", parse_scenario(minimal()), fresh_dir("fly"), 1.0, log), ConfigError);
}

TEST(Commands, DeterministicArtifacts) {
  const Scenario s = load_scenario(scenario_path("heisenberg_symmetric.json"));
  for (const char* command : {"simulate", "analyze"}) {
    const fs::path a = fresh_dir(std::string("det_a_") + command), b = fresh_dir(std::string("det_b_") + command);
    std::ostringstream log;
    run_command(command, s, a, 1.0, log);
    run_command(command, s, b, 1.0, log);
    for (const auto& entry : fs::directory_iterator(a))
      EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << command << " " << entry.path();
  }
}
