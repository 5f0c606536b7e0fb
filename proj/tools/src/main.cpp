#include <filesystem>
#include <stdexcept>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sail_cli/commands.hpp"
#include "sail_cli/run_config.hpp"

namespace fs = std::filesystem;
using namespace sail::cli;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return p.string() + suffix;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sail: near-cache LUT-GEMV simulator"};
  app.require_subcommand(1);

  // Flag values are kept as strings and applied after the config file.
  std::vector<std::pair<std::string, std::string>> flags;
  std::string config_path;

  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  const std::vector<Flag> common = {
      {"--model", "model", "toy, opt-350m, llama2-7b, llama2-13b, llama2-70b"},
      {"--nbw", "nbw", "weights per table (list or range for sweep)"},
      {"--bits", "bits", "weight bit width (list for sweep)"},
      {"--batch", "batch", "batch size (list or range for sweep)"},
      {"--seed", "seed", "RNG seed"},
      {"--out", "out", "output path"},
      {"--prt", "prt", "pattern reuse table on|off"},
      {"--context", "context", "KV-cache length"},
      {"--layers", "layers", "override layer count"},
      {"--hidden", "hidden", "override hidden size"},
      {"--ffn", "ffn", "override ffn size"},
      {"--act-bits", "act_bits", "activation bit width"},
      {"--cases", "cases", "check-gemv case count"},
      {"--samples", "typeconv_samples", "check-typeconv samples per random width"},
      {"--inject-fault", "inject_fault", "none|gemv|typeconv (test hook)"},
      {"--set", "", "extra key=value setting (repeatable)"},
  };

  bool trace = false;
  std::vector<std::string> extra;
  const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"check-gemv", "randomized LUT-GEMV campaign against the integer oracle"},
      {"check-typeconv", "in-memory int to float conversion audit"},
      {"simulate", "token generation report for one model and configuration"},
      {"sweep", "design-space sweep over nbw x bits x batch"},
  };
  for (const auto& [name, desc] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_flag("--trace", trace, "print one line per execution stage");
    for (const auto& f : common) {
      if (std::string(f.key).empty()) {
        sub->add_option(f.name, extra, f.help);
      } else {
        const std::string key = f.key;
        sub->add_option_function<std::string>(
            f.name, [&flags, key](const std::string& v) { flags.emplace_back(key, v); }, f.help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg;
    if (!config_path.empty())
      for (const auto& [k, v] : read_config_file(config_path)) apply_setting(cfg, k, v);
    for (const auto& [k, v] : flags) apply_setting(cfg, k, v);
    for (const auto& kv : extra) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (trace) apply_setting(cfg, "trace", "on");

    CommandResult r;
    if (command == "check-gemv") {
      r = cmd_check_gemv(cfg);
    } else if (command == "check-typeconv") {
      r = cmd_check_typeconv(cfg);
    } else if (command == "simulate") {
      r = cmd_simulate(cfg, &std::cerr);
    } else {
      r = cmd_sweep(cfg);
    }

    const std::string report = r.report.dump(2) + "\n";
    if (command == "sweep") {
      if (cfg.out.empty()) {
        std::cout << r.csv;
        std::cerr << report;
      } else {
        write_file(cfg.out, r.csv);
        write_file(sibling(cfg.out, ".plot.csv"), r.plot_csv);
        write_file(sibling(cfg.out, ".json"), report);
      }
    } else if (cfg.out.empty()) {
      std::cout << report;
    } else {
      write_file(cfg.out, report);
      if (!r.csv.empty()) write_file(sibling(cfg.out, ".layers.csv"), r.csv);
    }
    if (r.exit_code == kExitVerificationFailure) std::cerr << "sail " << command << ": verification failed\n";
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "sail: configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::logic_error& e) {
    std::cerr << "sail: configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "sail: error: " << e.what() << '\n';
    return kExitVerificationFailure;
  }
}
