#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sail/cycle_ledger.hpp"
#include "sail/prt.hpp"

namespace sail {

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr unsigned kMaxNbw = 4;

// Constants of the LUT-GEMV cycle model that are not closed-form fabric costs.
struct LutCostModel {
  std::size_t array_rows = 256;
  std::size_t array_cols = 512;
  unsigned accumulator_width = 32;
  // Wordline select of one LUT entry.
  std::uint64_t lookup_cycles = 1;
  // Latency of reading the group's weight rows out of the adjacent slice
  // before the table can be built (the LLC hit latency).
  std::uint64_t slice_access_cycles = 58;
  std::uint64_t prt_merge_cycles = 1;
  // Each level of the adder tree that merges per-array partial sums.
  std::uint64_t aggregation_cycles_per_level = 1;
};

// --- table geometry ---------------------------------------------------------

// Largest entry width that fits 2^nbw entries in one column of `rows` bits.
std::size_t max_bit_width(std::size_t rows, unsigned nbw);

// weight_bits + ceil(log2(nbw)) + 1
unsigned lut_entry_width(unsigned weight_bits, unsigned nbw);

// Throws CapacityError when entry_width * 2^nbw exceeds `rows`.
void check_lut_capacity(std::size_t entry_width, unsigned nbw, std::size_t rows);

// --- cost pieces ------------------------------------------------------------

// One addition per entry with two or more weights, each entry formed from the
// entry without its lowest index bit. The add runs at the width of that
// partial sum.
std::uint64_t lut_build_add_cycles(unsigned weight_bits, unsigned nbw);

// One lookup plus one add at accumulator width.
std::uint64_t lookup_step_cycles(const LutCostModel& model);

struct GroupCost {
  std::uint64_t build = 0;             // lut_build, once per group
  std::uint64_t transpose = 0;         // transpose, once per group
  std::uint64_t lookup_per_row = 0;    // lookup_accumulate, per batch row
  std::uint64_t prt_hit_per_row = 0;   // replaces lookup_per_row on a PRT hit
};

GroupCost group_cost(unsigned weight_bits, unsigned act_bits, unsigned nbw,
                     const LutCostModel& model = {});

// Cycles saved (net of the merge) each time the PRT short-circuits a group.
std::uint64_t prt_per_hit_saving(unsigned act_bits, const LutCostModel& model = {});

// --- tables -----------------------------------------------------------------

// entries[m] is the sum of the basis weights selected by m, where index bit
// (nbw - 1) selects the first weight and bit 0 the last.
struct LutTable {
  unsigned nbw = 0;
  unsigned weight_bits = 0;
  unsigned entry_width = 0;
  std::vector<std::int32_t> entries;

  std::int32_t operator[](std::size_t m) const { return entries[m]; }
  std::size_t size() const { return entries.size(); }
};

// Charges build adds to `ledger` (lut_build) when given.
LutTable build_lut(std::span<const std::int32_t> basis_weights, unsigned weight_bits,
                   std::size_t rows = 256, CycleLedger* ledger = nullptr);

// acc + (entries[pattern] << bit_pos). Charges lookup_accumulate when given a ledger.
std::int32_t lookup_accumulate(const LutTable& table, unsigned pattern, unsigned bit_pos,
                               std::int32_t acc, CycleLedger* ledger = nullptr,
                               const LutCostModel& model = {});

// Writes the 2^nbw subset sums of `basis` into `out`.
void fill_subset_sums(const std::int32_t* basis, unsigned nbw, std::int32_t* out);

// --- GEMV tile --------------------------------------------------------------

// activations: batch x k unsigned codes, row-major.
// weights:     k x n signed codes, row-major.
struct GemvJob {
  std::size_t batch = 1;
  std::size_t k = 0;
  std::size_t n = 0;
  unsigned act_bits = 8;
  unsigned weight_bits = 4;
  unsigned nbw = 2;
  std::vector<std::uint8_t> activations;
  std::vector<std::int8_t> weights;
};

// Checks shapes, code ranges, capacity and that the worst-case sum fits the
// 32-bit accumulator. Throws std::invalid_argument or CapacityError.
void validate(const GemvJob& job, const LutCostModel& model = {});

struct GemvResult {
  std::vector<std::int32_t> acc;  // batch x n, row-major
  CycleLedger ledger;
  std::size_t groups = 0;
  std::uint64_t lookup_steps = 0;
  std::uint64_t prt_hits = 0;
};

// Runs the tile group by group: one table per output column per group of nbw
// weight rows, built once and reused for every batch row.
GemvResult gemv_tile(const GemvJob& job, PatternReuseTable* prt = nullptr,
                     const LutCostModel& model = {});

// lut_build / total. Throws std::invalid_argument on an empty ledger.
double lut_overhead_fraction(const CycleLedger& ledger);

}  // namespace sail
