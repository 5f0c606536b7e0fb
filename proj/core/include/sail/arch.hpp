#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "sail/bitplane.hpp"
#include "sail/cycle_ledger.hpp"
#include "sail/lutgemv.hpp"
#include "sail/quant.hpp"

namespace sail {

// --- instruction ------------------------------------------------------------

class IsaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// lutmm_1k word layout (32 bits, RISC-V custom-0 major opcode):
//
//   31    28 27  25 24   20 19   15 14  12 11    7 6      0
//   [ loc  ] [ sc ] [ rw  ] [ ri  ] [ ql ] [ rd  ] [opcode]
//      4       3      5       5       3      5        7
//
// ql is stored as an index into {2, 3, 4, 5, 6, 8}; indices 6 and 7 are
// reserved. loc is limited to 4 bits, so a single instruction addresses at
// most 16 tiles; wider matrices are reached by advancing rw.
inline constexpr std::uint32_t kLutmmOpcode = 0x0B;
inline constexpr std::size_t kTileDim = 1024;
inline constexpr unsigned kMaxScale = 7;
inline constexpr unsigned kMaxEncodableLoc = 15;

struct LutmmInstruction {
  std::uint32_t loc = 0;
  std::uint32_t sc = 0;
  std::uint32_t rw = 0;
  std::uint32_t ri = 0;
  std::uint32_t ql = 4;
  std::uint32_t rd = 0;

  bool operator==(const LutmmInstruction&) const = default;
};

std::uint32_t encode(const LutmmInstruction& instr);
LutmmInstruction decode(std::uint32_t word);

struct ColumnRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const ColumnRange&) const = default;
};

// [loc * tile_dim, (loc + 1) * tile_dim) of a matrix tile_dim * 2^sc wide.
ColumnRange tile_columns(std::size_t loc, unsigned sc, std::size_t tile_dim = kTileDim);

// --- address hasher -----------------------------------------------------------

struct HasherConfig {
  std::size_t num_slices = 32;
  unsigned block_bits = 9;
};

// The block number (addr >> block_bits) is XOR-folded in chunks as wide as a
// slice id, then reduced modulo num_slices.
std::size_t hash_address(std::uint64_t addr, const HasherConfig& cfg = {});

// --- tile mapping ---------------------------------------------------------------

// RowSplit spreads the elements of each row over the arrays (every array gets
// a column range of every row). ColumnSplit spreads the elements of each
// column (every array gets a row range, all columns).
enum class MappingMode { RowSplit, ColumnSplit };

struct ArrayShare {
  std::size_t array = 0;
  std::size_t row_begin = 0, row_end = 0;
  std::size_t col_begin = 0, col_end = 0;
  std::vector<std::int32_t> data;  // row-major over the share
};

struct TileMapping {
  MappingMode mode = MappingMode::RowSplit;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<ArrayShare> shares;
};

// Throws GeometryError when a share would exceed array_cols columns.
TileMapping map_tile(std::span<const std::int32_t> tile, std::size_t rows, std::size_t cols,
                     MappingMode mode, std::size_t num_arrays,
                     std::size_t array_cols = BitPlaneArray::kDefaultCols);
std::vector<std::int32_t> reassemble(const TileMapping& mapping);

// --- simulated machine ----------------------------------------------------------

class UnmappedAddressError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class SimMemory {
 public:
  void map(std::uint64_t base, std::vector<std::uint8_t> bytes);
  void map_zero(std::uint64_t base, std::size_t size) { map(base, std::vector<std::uint8_t>(size, 0)); }
  std::span<const std::uint8_t> read(std::uint64_t addr, std::size_t len) const;
  void write(std::uint64_t addr, std::span<const std::uint8_t> bytes);

 private:
  const std::vector<std::uint8_t>* region(std::uint64_t addr, std::size_t len, std::uint64_t& offset) const;
  std::map<std::uint64_t, std::vector<std::uint8_t>> regions_;
};

struct MachineState {
  std::array<std::uint64_t, 32> regs{};
  SimMemory memory;
};

// --- cluster --------------------------------------------------------------------

struct ClusterConfig {
  std::size_t num_arrays = 32;
  std::size_t array_rows = BitPlaneArray::kDefaultRows;
  std::size_t array_cols = BitPlaneArray::kDefaultCols;
  std::size_t tile_dim = kTileDim;
  HasherConfig hasher;
};

class CSramCluster {
 public:
  explicit CSramCluster(ClusterConfig cfg = {});

  const ClusterConfig& config() const { return cfg_; }
  std::size_t arrays_per_tile() const { return cfg_.tile_dim / cfg_.array_cols; }
  MappingMode mapping_mode() const { return mode_; }
  void set_mapping_mode(MappingMode m) { mode_ = m; }

  BitPlaneArray& array(std::size_t i) { return arrays_.at(i); }
  const BitPlaneArray& array(std::size_t i) const { return arrays_.at(i); }
  std::size_t size() const { return arrays_.size(); }

 private:
  ClusterConfig cfg_;
  MappingMode mode_ = MappingMode::RowSplit;
  std::vector<BitPlaneArray> arrays_;
};

// When the CPU dequantizes: once per tile, or after every quantization group
// of the reduction dimension (partial sums return to the arrays re-zeroed).
enum class RoundTrip { PerTile, PerQuantGroup };

struct ExecuteOptions {
  unsigned nbw = 2;
  RoundTrip round_trip = RoundTrip::PerTile;
  LutCostModel cost;
  double dequant_cycles_per_element = 1.0;
  // Step 1 transfer rate in bytes per core cycle.
  double load_bytes_per_cycle = 64.0e9 / 3.0e9;
  // First array of the tile; the tile occupies arrays_per_tile() arrays.
  std::size_t first_array = 0;
  std::ostream* trace = nullptr;
};

struct ExecutionResult {
  std::vector<float> output;  // batch x tile_dim
  std::size_t batch = 0;
  CycleLedger ledger;
  std::size_t group_iterations = 0;
  std::size_t round_trips = 0;
  unsigned conversion_width = 0;
  std::uint64_t tile_bytes = 0;
  std::vector<std::size_t> slice_blocks;  // 512-byte blocks of the tile per slice
};

// Reduction length covered by one round trip, and the conversion width its
// worst-case partial sum needs.
std::size_t round_trip_length(const QuantizedTensor& weights, const QuantizedTensor& inputs,
                              RoundTrip mode);
unsigned conversion_width(std::size_t reduction_length, unsigned weight_bits, unsigned act_bits);

// Row budget of one array for a tile: accumulators plus the larger of the
// table and the conversion working set.
std::size_t tile_rows_needed(std::size_t batch, unsigned weight_bits, unsigned nbw, unsigned conv_width);

// Runs one lutmm_1k. rw and ri point at SAILT images of the weight matrix
// (tile_dim * 2^sc rows of output features, tile_dim columns of reduction) and
// of the quantized inputs (batch rows). The float32 result is written at rd.
ExecutionResult execute_instruction(CSramCluster& cluster, const LutmmInstruction& instr,
                                    MachineState& state, const ExecuteOptions& options = {});

// CPU-side dequantization of one partial sum: y += s_w * s_x * (acc - zp * wsum).
inline float dequant_term(float weight_scale, float input_scale, float acc, std::int64_t zp_wsum) {
  return (weight_scale * input_scale) * (acc - static_cast<float>(zp_wsum));
}

}  // namespace sail
