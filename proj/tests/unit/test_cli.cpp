#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sail_cli/commands.hpp"
#include "sail_cli/run_config.hpp"

using namespace sail;
using namespace sail::cli;

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAIL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path temp_file(const std::string& name, const std::string& text) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

RunConfig small_gemv_config() {
  RunConfig c;
  c.cases = 40;
  return c;
}

}  // namespace

// --- configuration ------------------------------------------------------------

TEST(RunConfig, ParsesKeyValueWithComments) {
  const auto kv = parse_config_text("# header\nnbw = 3\n\n  bits=5   # trailing\nmodel = llama2-7b\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv.at("nbw"), "3");
  EXPECT_EQ(kv.at("bits"), "5");
  EXPECT_EQ(kv.at("model"), "llama2-7b");
  EXPECT_THROW(parse_config_text("nbw 3\n"), ConfigError);
}

TEST(RunConfig, ListsAndRanges) {
  RunConfig c;
  apply_setting(c, "batch", "1..4,8");
  EXPECT_EQ(c.batch, (std::vector<std::size_t>{1, 2, 3, 4, 8}));
  apply_setting(c, "nbw", "2,4");
  EXPECT_EQ(c.nbw, (std::vector<unsigned>{2, 4}));
  EXPECT_TRUE(c.is_set("nbw"));
  EXPECT_FALSE(c.is_set("bits"));
  apply_setting(c, "prt", "off");
  EXPECT_FALSE(c.prt);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(apply_setting(c, "colour", "blue"), ConfigError);
  EXPECT_THROW(apply_setting(c, "nbw", "two"), ConfigError);
  EXPECT_THROW(apply_setting(c, "prt", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(c, "batch", "4..2"), ConfigError);
  c.model = "gpt-9";
  EXPECT_THROW(resolve_model(c), ConfigError);
  c = RunConfig{};
  apply_setting(c, "dram_bandwidth", "0");
  EXPECT_THROW(resolve_pipeline(c), ConfigError);
}

TEST(RunConfig, EveryKnownKeyHasADefault) {
  const RunConfig c;
  const auto j = to_json(c);
  for (const auto& k : known_keys()) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(RunConfig, OverridesAndPipelineKeys) {
  RunConfig c;
  apply_setting(c, "model", "llama2-7b");
  apply_setting(c, "layers", "2");
  apply_setting(c, "lookup_cycles", "3");
  apply_setting(c, "monthly_price", "100");
  const auto m = resolve_model(c);
  EXPECT_EQ(m.layers, 2u);
  EXPECT_EQ(m.hidden_size, 4096u);
  const auto p = resolve_pipeline(c);
  EXPECT_EQ(p.cost.lookup_cycles, 3u);
  EXPECT_EQ(p.monthly_price, 100.0);
}

// --- binary: exit codes and precedence ----------------------------------------------

TEST(CliBinary, ExitCodes) {
  EXPECT_EQ(run_cli("check-gemv --cases 10"), kExitOk);
  EXPECT_EQ(run_cli("check-gemv --cases 10 --inject-fault gemv"), kExitVerificationFailure);
  EXPECT_EQ(run_cli("check-gemv --set colour=blue"), kExitConfigError);
  EXPECT_EQ(run_cli("simulate --model gpt-9"), kExitConfigError);
  EXPECT_EQ(run_cli("simulate --nbw 9"), kExitConfigError);
  EXPECT_EQ(run_cli("nonsense"), kExitConfigError);
  EXPECT_EQ(run_cli("check-gemv --config /nonexistent/sail.cfg"), kExitConfigError);
}

TEST(CliBinary, FlagsOverrideConfigFile) {
  const auto cfg = temp_file("sail_cli_test.cfg", "nbw = 3\nbits = 2\nbatch = 5\n");
  const auto out = fs::temp_directory_path() / "sail_cli_test_out.csv";
  ASSERT_EQ(run_cli("sweep --config " + cfg.string() + " --bits 4 --out " + out.string()), kExitOk);
  std::ifstream in(fs::temp_directory_path() / "sail_cli_test_out.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string csv = ss.str();
  EXPECT_NE(csv.find("\n3,4,5,"), std::string::npos) << csv;
  EXPECT_EQ(csv.find("\n3,2,5,"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::temp_directory_path() / "sail_cli_test_out.plot.csv"));
  fs::remove(cfg);
}

// --- commands -------------------------------------------------------------------

TEST(Commands, CheckGemvPassesAndIsDeterministic) {
  const auto a = cmd_check_gemv(small_gemv_config());
  EXPECT_EQ(a.exit_code, kExitOk);
  EXPECT_EQ(a.report["failures"], 0);
  EXPECT_EQ(a.report["prt"]["mismatches"], 0);
  EXPECT_EQ(a.report["prt"]["accounting_errors"], 0);
  const auto b = cmd_check_gemv(small_gemv_config());
  EXPECT_EQ(a.report.dump(), b.report.dump());
}

TEST(Commands, CheckGemvFaultGivesCounterexample) {
  auto c = small_gemv_config();
  c.inject_fault = "gemv";
  const auto r = cmd_check_gemv(c);
  EXPECT_EQ(r.exit_code, kExitVerificationFailure);
  EXPECT_FALSE(r.report["first_counterexample"].is_null());
  EXPECT_EQ(r.report["status"], "fail");
}

TEST(Commands, OracleMatchesDefinition) {
  GemvJob j;
  j.batch = 1, j.k = 2, j.n = 2, j.weight_bits = 4, j.nbw = 1;
  j.weights = {1, -2, 3, 4};
  j.activations = {5, 6};
  EXPECT_EQ(oracle_gemv(j), (std::vector<std::int64_t>{5 + 18, -10 + 24}));
  EXPECT_EQ(reference_int_to_float(false, 5), 0x40A00000u);
  EXPECT_EQ(reference_int_to_float(true, 0), 0u);
}

TEST(Commands, CheckTypeconvPassFailDeterminism) {
  RunConfig c;
  c.typeconv_samples = 2000;
  const auto a = cmd_check_typeconv(c);
  EXPECT_EQ(a.exit_code, kExitOk);
  EXPECT_EQ(a.report["audit"].size(), 24u);
  for (const auto& row : a.report["audit"]) EXPECT_TRUE(row["pass"].get<bool>());
  EXPECT_EQ(a.report.dump(), cmd_check_typeconv(c).report.dump());
  c.inject_fault = "typeconv";
  EXPECT_EQ(cmd_check_typeconv(c).exit_code, kExitVerificationFailure);
}

TEST(Commands, SimulateToy) {
  RunConfig c;
  c.batch = {8};
  const auto r = cmd_simulate(c);
  EXPECT_EQ(r.exit_code, kExitOk) << r.report.dump(2);
  EXPECT_TRUE(r.report["ledger_consistent"].get<bool>());
  EXPECT_TRUE(r.report["prt"]["outputs_identical"].get<bool>());
  EXPECT_TRUE(r.report["fabric_tile"]["output_match"].get<bool>());
  EXPECT_TRUE(r.report["fabric_tile"]["ledger_matches_model"].get<bool>());
  EXPECT_TRUE(r.report["config"].contains("seed"));
  for (auto name : kAllCycleCategories) EXPECT_TRUE(r.report["ledger"].contains(std::string(category_name(name))));
  EXPECT_FALSE(r.csv.empty());

  RunConfig one;
  one.batch = {1};
  one.explicit_keys.insert("batch");
  const auto r1 = cmd_simulate(one);
  EXPECT_GT(r1.report["gemv_cycles_per_token"].get<double>() / r.report["gemv_cycles_per_token"].get<double>(), 1.0);
}

TEST(Commands, SimulateTraceListsExecutionSteps) {
  RunConfig c;
  c.batch = {2};
  c.trace = true;
  std::ostringstream trace;
  const auto r = cmd_simulate(c, &trace);
  EXPECT_EQ(r.exit_code, kExitOk);
  const std::string t = trace.str();
  EXPECT_NE(t.find("step1"), std::string::npos);
  EXPECT_NE(t.find("step3"), std::string::npos);
  EXPECT_NE(t.find("step5"), std::string::npos);
}

TEST(Commands, SweepSingletonAndOrdering) {
  RunConfig c;
  apply_setting(c, "nbw", "3");
  apply_setting(c, "bits", "4");
  apply_setting(c, "batch", "5");
  const auto r = cmd_sweep(c);
  EXPECT_EQ(r.report["cells"], 1);
  const double cpt = cycles_per_token(resolve_model(c), [&] {
    auto p = resolve_pipeline(c);
    p.nbw = 3, p.weight_bits = 4, p.batch = 5;
    return p;
  }());
  std::istringstream csv(r.csv);
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(row.rfind("3,4,5,", 0), 0u);
  EXPECT_EQ(r.report["argmin_nbw"][0]["cycles_per_token"].get<double>(), cpt);

  RunConfig g;
  g.model = "llama2-7b";
  apply_setting(g, "nbw", "2,4");
  apply_setting(g, "bits", "2,4");
  apply_setting(g, "batch", "24");
  const auto a = cmd_sweep(g);
  EXPECT_TRUE(a.report["ordering_batch24"]["holds"].get<bool>());
  EXPECT_EQ(a.csv, cmd_sweep(g).csv);
  EXPECT_EQ(a.plot_csv, cmd_sweep(g).plot_csv);
}
