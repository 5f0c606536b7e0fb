#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/pipeline.hpp"

namespace sail::cli {

// Exit statuses of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailure = 1;
inline constexpr int kExitConfigError = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every setting has a default here; the config file overrides the defaults
// and flags override the file.
struct RunConfig {
  std::string model = "toy";
  // Overrides of the preset's dimensions; 0 keeps the preset.
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t ffn = 0;
  std::size_t context = 0;

  std::vector<unsigned> nbw = {2};
  std::vector<unsigned> bits = {4};
  std::vector<std::size_t> batch = {8};
  unsigned act_bits = 8;

  std::uint64_t seed = 1;
  std::string out;  // empty: report on stdout
  bool prt = true;
  bool trace = false;

  // check-gemv / check-typeconv
  std::size_t cases = 1000;
  std::size_t typeconv_samples = 1000000;
  std::string inject_fault = "none";  // none | gemv | typeconv

  PipelineConfig pipeline;

  // Keys given explicitly through the file or flags.
  std::set<std::string> explicit_keys;

  bool is_set(const std::string& key) const { return explicit_keys.count(key) != 0; }
};

// key = value lines; '#' starts a comment; blank lines are ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Throws ConfigError on an unknown key or unparsable value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

std::vector<std::string> known_keys();

// Preset plus dimension overrides; throws ConfigError for an unknown model.
ModelSpec resolve_model(const RunConfig& cfg);
// The pipeline settings at the first nbw/bits/batch value.
PipelineConfig resolve_pipeline(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const ModelSpec& m);
nlohmann::json to_json(const CycleLedger& ledger);

}  // namespace sail::cli
