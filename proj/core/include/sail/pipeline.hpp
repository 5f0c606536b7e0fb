#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sail/cycle_ledger.hpp"
#include "sail/lutgemv.hpp"

namespace sail {

// --- configuration ------------------------------------------------------------

struct PipelineConfig {
  double core_clock_hz = 3.0e9;
  double noc_bytes_per_cycle = 32.0;
  double noc_clock_hz = 2.0e9;
  double dram_bandwidth = 204.8e9;  // bytes/s
  std::uint64_t llc_capacity = 32ull << 20;
  std::size_t llc_slices = 32;

  std::size_t batch = 1;
  unsigned nbw = 2;
  unsigned weight_bits = 4;
  unsigned act_bits = 8;

  std::size_t tile_dim = 1024;
  std::size_t array_cols = 512;
  std::size_t num_arrays = 32;
  LutCostModel cost;
  double dequant_cycles_per_element = 1.0;

  // Q x K^T over the cached keys.
  unsigned kv_bits = 8;
  std::size_t kv_lanes = 4;         // arrays sharing one block's reduction
  std::size_t kv_block_len = 512;   // cached tokens per column block

  double monthly_price = 665.45;    // dollars

  double load_bytes_per_second() const;
  double load_bytes_per_cycle() const { return load_bytes_per_second() / core_clock_hz; }
  std::size_t arrays_per_tile() const { return tile_dim / array_cols; }
  // Tiles resident in one half of the LLC at a time.
  std::size_t tiles_per_wave() const;
};

// Throws std::invalid_argument on non-positive rates, zero batch, or geometry
// that does not divide.
void validate(const PipelineConfig& cfg);

struct ModelSpec {
  std::string name = "custom";
  std::size_t layers = 1;
  std::size_t hidden_size = 1024;
  std::size_t ffn_dim = 4096;
  std::size_t context_length = 4096;
  unsigned weight_bits = 4;
};

void validate(const ModelSpec& model);

// toy (alias opt-350m), llama2-7b, llama2-13b, llama2-70b.
std::optional<ModelSpec> model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

// --- ping-pong schedule -------------------------------------------------------

struct StageTimes {
  std::uint64_t load = 0;
  std::uint64_t compute = 0;
};

// L1 + sum_{i>=2} max(L_i, C_{i-1}) + C_N; zero for an empty list.
std::uint64_t makespan(std::span<const StageTimes> stages);

// Reduction length handled per round trip so that the conversion width stays
// within range. Halves tile_dim until it fits.
std::size_t segment_length(std::size_t tile_dim, unsigned weight_bits, unsigned act_bits);

// Compute-side cycles of one tile_dim x tile_dim tile for `batch` rows, every
// category except load.
CycleLedger tile_compute_ledger(const PipelineConfig& cfg, std::size_t batch);

// DRAM bytes of one tile: packed codes plus one f32 scale per output row and
// round trip.
std::uint64_t tile_bytes(const PipelineConfig& cfg);

struct Stage {
  std::size_t layer = 0;
  std::string phase;       // qkv, o, gate_up, down
  std::size_t tiles = 0;
  std::uint64_t bytes = 0;
  StageTimes times;
};

struct TokenSchedule {
  std::vector<Stage> stages;
  std::uint64_t makespan = 0;
  std::size_t tiles = 0;
  CycleLedger tile_ledger;  // one tile
  // Compute categories over every stage plus the load that compute could not
  // hide; total() == makespan.
  CycleLedger ledger;
};

// One batched decoding iteration over every layer GEMV. Throws CapacityError
// when a tile does not fit half the LLC.
TokenSchedule tile_schedule(const ModelSpec& model, const PipelineConfig& cfg);

// Weight GEMVs only: makespan / batch.
double cycles_per_token(const ModelSpec& model, const PipelineConfig& cfg);

// Q x K^T for one user over `context_length` cached keys of width `hidden`,
// one layer. Linear in the context; zero for an empty cache.
std::uint64_t kv_attention_cycles(std::size_t context_length, std::size_t hidden,
                                  const PipelineConfig& cfg);

double tokens_per_second(double cycles_per_token, double core_clock_hz);
// rate x 30 days / monthly price. Throws std::invalid_argument unless price > 0.
double tokens_per_dollar(double tokens_per_second, double monthly_price);

inline constexpr double kSecondsPerMonth = 30.0 * 24 * 3600;

struct TokenReport {
  TokenSchedule schedule;
  double gemv_cycles_per_token = 0;
  std::uint64_t kv_cycles_per_token = 0;  // all layers, one user
  double cycles_per_token = 0;            // gemv + kv
  double kv_fraction = 0;
  double lut_fraction = 0;
  double tokens_per_second = 0;
  double tpd = 0;
};

TokenReport simulate_token(const ModelSpec& model, const PipelineConfig& cfg);

// --- sweeps ---------------------------------------------------------------------

struct SweepResult {
  unsigned nbw = 0;
  unsigned weight_bits = 0;
  std::size_t batch = 0;
  std::uint64_t total_cycles = 0;  // makespan of one batched iteration
  double cycles_per_token = 0;
  double lut_fraction = 0;
  double tokens_per_second = 0;
  double tpd = 0;
  std::string status = "ok";  // or "capacity_error"
  std::string error;

  bool ok() const { return status == "ok"; }
  bool operator==(const SweepResult&) const = default;
};

struct SweepGrid {
  std::vector<unsigned> nbw;
  std::vector<unsigned> weight_bits;
  std::vector<std::size_t> batch;
};

// Weight GEMV cycles only, in grid order (batch outermost, then bits, then nbw).
std::vector<SweepResult> sweep(const SweepGrid& grid, const ModelSpec& model,
                               const PipelineConfig& base);

struct BestNbw {
  std::size_t batch = 0;
  unsigned weight_bits = 0;
  unsigned nbw = 0;  // 0 when every cell failed
  double cycles_per_token = 0;
  bool operator==(const BestNbw&) const = default;
};

std::vector<BestNbw> argmin_nbw(std::span<const SweepResult> results);

// Header: nbw,weight_bits,batch,total_cycles,cycles_per_token,lut_fraction,
// tokens_per_second,tpd,status
void write_sweep_csv(std::ostream& os, std::span<const SweepResult> results);
// x = batch, one column per nbw{N}_q{bits} with cycles per token.
void write_plot_csv(std::ostream& os, std::span<const SweepResult> results);

}  // namespace sail
