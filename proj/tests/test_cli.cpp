#include <hlab/cli.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

using namespace hlab;
using namespace hlab::cli;
namespace fs = std::filesystem;

RunConfig load(const std::string& name) { return parse_config(load_document(std::string(HLAB_CONFIG_DIR) + "/" + name)); }

/// Result or the mapped exit code of a library error.
int exit_of(const std::string& command, const RunConfig& c, std::string* message = nullptr) {
  try {
    return run(command, c).exit_code;
  } catch (const Error& e) {
    if (message) *message = e.what();
    return exit_code_for(e.error_class());
  }
}

int shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
#ifdef WEXITSTATUS
  return WEXITSTATUS(rc);
#else
  return rc;
#endif
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CliConfig, EverySampleConfigParses) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(HLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(parse_config(load_document(entry.path().string())));
    ++seen;
  }
  EXPECT_GE(seen, 10);
}

TEST(CliConfig, InvalidCorpusIsRejectedAsValidationError) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(std::string(HLAB_TEST_DATA_DIR) + "/invalid")) {
    SCOPED_TRACE(entry.path().string());
    try {
      json doc = apply_overrides(load_document(entry.path().string()), {});
      parse_config(doc);
      ADD_FAILURE() << "accepted an invalid config";
    } catch (const Error& e) {
      EXPECT_EQ(exit_code_for(e.error_class()), exit_validation) << e.what();
    }
    ++seen;
  }
  EXPECT_GE(seen, 10);
}

TEST(CliConfig, UnknownKeyIsNamedInTheMessage) {
  try {
    parse_config(parse_document(R"({"grid": 16, "colour": 1})"));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
}

TEST(CliConfig, OverridesAreWrittenIntoTheEchoedInputs) {
  json doc = apply_overrides(parse_document(R"({"field": {"kind": "zero"}, "grid": 16})"), Overrides{32, 11});
  const RunConfig c = parse_config(doc);
  EXPECT_EQ(*c.grid, 32);
  EXPECT_EQ(c.linking->params.seed, 11u);
  EXPECT_EQ(c.raw.at("grid"), 32);
}

TEST(CliRun, AbcHelicityMatchesClosedForm) {
  const RunResult r = run("helicity", load("abc_helicity.json"));
  EXPECT_EQ(r.exit_code, exit_ok);
  // H = (A^2 + B^2 + C^2) (2 pi)^3 for ABC fields, here A = B = C = 1.
  const double expected = 3.0 * std::pow(2.0 * pi, 3);
  EXPECT_NEAR(r.report["results"]["helicity"].get<double>(), expected, 1e-10 * expected);
  EXPECT_EQ(r.report["status"], "ok");
  for (const char* key : {"command", "inputs", "results", "residuals", "tolerances", "status", "version",
                          "wall_clock_seconds"})
    EXPECT_TRUE(r.report.contains(key)) << key;
}

TEST(CliRun, PullbackPreservesHelicity) {
  const double a = run("helicity", load("abc_helicity.json")).report["results"]["helicity"].get<double>();
  const double b = run("helicity", load("abc_pullback_helicity.json")).report["results"]["helicity"].get<double>();
  EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
}

TEST(CliRun, TranslationFieldIsNonExact) {
  std::string msg;
  EXPECT_EQ(exit_of("helicity", load("translation_helicity.json"), &msg), exit_precondition);
  EXPECT_NE(msg.find("non-exact Hamiltonian structure"), std::string::npos) << msg;
}

TEST(CliRun, TrivialPlugHasZeroResidual) {
  const RunResult r = run("gg-verify", load("gg_trivial.json"));
  EXPECT_EQ(r.exit_code, exit_ok);
  EXPECT_EQ(r.report["results"]["calabi"].get<double>(), 0.0);
  EXPECT_EQ(r.report["residuals"]["gg_residual"].get<double>(), 0.0);
}

TEST(CliRun, PlugInsertReportsRestorationAndFlux) {
  const RunResult r = run("plug-insert", load("plug_insert.json"));
  EXPECT_EQ(r.exit_code, exit_ok);
  EXPECT_GT(r.report["results"]["modified_nodes"].get<std::size_t>(), 0u);
  EXPECT_LE(r.report["residuals"]["max_flux_change"].get<double>(), 1e-10);
  EXPECT_LE(r.report["residuals"]["inverse_plug_restoration"].get<double>(), 1e-6);
  EXPECT_LE(r.report["residuals"]["exit_map_vs_time_one_map"].get<double>(), 1e-4);
}

TEST(CliRun, FluxOfSuspensionIsUnchangedBySurgery) {
  const RunResult r = run("flux", load("suspension_flux.json"));
  EXPECT_EQ(r.exit_code, exit_ok);
  EXPECT_LE(r.report["residuals"]["max_flux_change"].get<double>(), 1e-10);
}

TEST(CliRun, CalabiClosedFormAgreesWithQuadrature) {
  const RunResult r = run("calabi", load("calabi_bump.json"));
  // Polynomial bump: int H0 = a pi rho^2 / 4, Cal = 2 * I * int H0.
  EXPECT_NEAR(r.report["results"]["calabi"].get<double>(), 2.0 * pi * 0.25 / 4.0, 1e-12);
  EXPECT_LE(std::abs(r.report["residuals"]["quadrature_minus_closed_form"].get<double>()), 1e-10);
}

TEST(CliRun, MassFlowOfTranslation) {
  const RunResult r = run("massflow-verify", load("massflow_translation.json"));
  EXPECT_EQ(r.exit_code, exit_ok);
  EXPECT_NEAR(r.report["results"]["flux_pairing"].get<double>(), 4.0 * pi * pi, 1e-9);
  EXPECT_LE(std::abs(r.report["residuals"]["winding_residual"].get<double>()), 1e-9);
}

TEST(CliRun, ReportsAreDeterministicAndReplayable) {
  const RunConfig c = load("gg_verify.json");
  const RunResult a = run("gg-verify", c);
  const RunResult b = run("gg-verify", parse_config(a.report["inputs"]));
  EXPECT_EQ(stable_part(a.report), stable_part(b.report));
}

TEST(CliRun, LinkReportIsSeedDeterministic) {
  const RunConfig c = load("link_quick.json");
  const json a = stable_part(run("link-estimate", c).report);
  const json b = stable_part(run("link-estimate", c).report);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["results"]["seed"], 7);
  EXPECT_TRUE(a["results"].contains("biot_savart_helicity"));
}

TEST(CliRun, UnknownCommandIsValidationError) { EXPECT_THROW(run("frobnicate", load("abc_helicity.json")), ValidationError); }

TEST(CliCsv, EmptySweepEmitsHeaderOnly) {
  const RunResult r = run("sweep", load("sweep_empty.json"));
  EXPECT_EQ(r.csv, "grid,helicity_before,helicity_after,calabi,residual,relative_residual\n");
}

TEST(CliCsv, RowsUseRoundTripPrecision) {
  const std::string csv = format_csv({"a", "b"}, {{0.1, 1.0 / 3.0}});
  std::istringstream in(csv.substr(csv.find('\n') + 1));
  double x = 0, y = 0;
  char comma = 0;
  in >> x >> comma >> y;
  EXPECT_EQ(x, 0.1);
  EXPECT_EQ(y, 1.0 / 3.0);
}

TEST(CliCsv, UnwritablePathIsValidationError) {
  EXPECT_THROW(emit_csv("/nonexistent-dir/hlab/out.csv", "a\n"), ValidationError);
}

class CliBinary : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hlab_cli_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string invoke(const std::string& args) const {
    return std::string("\"") + HLAB_CLI_PATH + "\" " + args + " 2>\"" + (dir_ / "stderr.txt").string() + "\"";
  }
  fs::path dir_;
};

TEST_F(CliBinary, HelicityWritesReport) {
  const fs::path out = dir_ / "report.json";
  ASSERT_EQ(shell(invoke("helicity --config \"" HLAB_CONFIG_DIR "/abc_helicity.json\" --out \"" + out.string() + "\"")), 0);
  const json report = json::parse(slurp(out));
  EXPECT_EQ(report["command"], "helicity");
  EXPECT_NEAR(report["results"]["helicity"].get<double>(), 3.0 * std::pow(2.0 * pi, 3), 1e-7);
}

TEST_F(CliBinary, ExitCodesFollowErrorClasses) {
  EXPECT_EQ(shell(invoke("helicity --config \"" HLAB_CONFIG_DIR "/translation_helicity.json\" --quiet")), 3);
  const json err = json::parse(slurp(dir_ / "stderr.txt"));
  EXPECT_EQ(err["exit_code"], 3);
  EXPECT_EQ(shell(invoke("helicity --config \"" HLAB_TEST_DATA_DIR "/invalid/grid_not_power_of_two.json\" --quiet")), 2);
  EXPECT_EQ(shell(invoke("helicity --config \"" + (dir_ / "missing.json").string() + "\" --quiet")), 2);
  EXPECT_EQ(shell(invoke("helicity --quiet")), 2);
  json strict = load_document(std::string(HLAB_CONFIG_DIR) + "/gg_verify.json");
  strict["tolerances"] = {{"gg_relative", 1e-12}};
  std::ofstream(dir_ / "strict.json") << strict.dump();
  EXPECT_EQ(shell(invoke("gg-verify --config \"" + (dir_ / "strict.json").string() + "\" --grid 32 --quiet")), 4);
}

TEST_F(CliBinary, GridOverrideAndThreadsGiveSameReport) {
  const fs::path a = dir_ / "a.json", b = dir_ / "b.json";
  const std::string cfg = "--config \"" HLAB_CONFIG_DIR "/plug_insert.json\"";
  ASSERT_EQ(shell(invoke("plug-insert " + cfg + " --threads 1 --out \"" + a.string() + "\"")), 0);
  ASSERT_EQ(shell(invoke("plug-insert " + cfg + " --threads 3 --out \"" + b.string() + "\"")), 0);
  EXPECT_EQ(stable_part(json::parse(slurp(a))), stable_part(json::parse(slurp(b))));
}

TEST_F(CliBinary, SweepWritesCsv) {
  const fs::path csv = dir_ / "sweep.csv";
  ASSERT_EQ(shell(invoke("sweep --config \"" HLAB_CONFIG_DIR "/sweep_empty.json\" --quiet --out \"" + csv.string() + "\"")), 0);
  EXPECT_EQ(slurp(csv), "grid,helicity_before,helicity_after,calabi,residual,relative_residual\n");
  EXPECT_EQ(shell(invoke("sweep --config \"" HLAB_CONFIG_DIR "/sweep_empty.json\" --quiet --out /nonexistent-dir/x.csv")), 2);
}

}  // namespace
