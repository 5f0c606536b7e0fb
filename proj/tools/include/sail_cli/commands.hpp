#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/lutgemv.hpp"
#include "sail_cli/run_config.hpp"

namespace sail::cli {

struct CommandResult {
  int exit_code = kExitOk;
  nlohmann::json report;
  std::string csv;       // simulate: per-stage timings; sweep: the grid
  std::string plot_csv;  // sweep only
};

// --- oracles ----------------------------------------------------------------

// Triple loop over int64.
std::vector<std::int64_t> oracle_gemv(const GemvJob& job);

// IEEE-754 bits of (sign ? -magnitude : magnitude); zero maps to +0.
std::uint32_t reference_int_to_float(bool sign, std::uint32_t magnitude);

// One case of the randomized LUT-GEMV campaign.
GemvJob random_gemv_case(std::mt19937_64& rng, unsigned act_bits = 8);

// --- commands ---------------------------------------------------------------

CommandResult cmd_check_gemv(const RunConfig& cfg);
CommandResult cmd_check_typeconv(const RunConfig& cfg);
// `trace` receives one line per stage per iteration of the fabric tile when
// cfg.trace is set.
CommandResult cmd_simulate(const RunConfig& cfg, std::ostream* trace = nullptr);
CommandResult cmd_sweep(const RunConfig& cfg);

}  // namespace sail::cli
