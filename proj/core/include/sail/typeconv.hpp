#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sail/bitplane.hpp"

namespace sail {

inline constexpr unsigned kMinConvertWidth = 2;
inline constexpr unsigned kMaxConvertWidth = 25;

struct ConversionReport {
  std::uint64_t charged_cycles = 0;
  std::uint64_t logical_ops = 0;
};

// Working rows needed by int_to_float_inmem beyond its 32 destination rows.
constexpr std::size_t int_to_float_scratch_rows(unsigned n) { return 2 * static_cast<std::size_t>(n); }

// Converts the n-bit sign-magnitude value held in every active column at
// src_base (magnitude in rows 0..n-2, sign in row n-1) into IEEE-754 single
// precision bits at dst_base..dst_base+31. The source rows are left intact.
// Scratch rows default to the block right after the destination.
ConversionReport int_to_float_inmem(BitPlaneArray& array, std::size_t src_base, unsigned n,
                                    std::size_t dst_base);
ConversionReport int_to_float_inmem(BitPlaneArray& array, std::size_t src_base, unsigned n,
                                    std::size_t dst_base, std::size_t scratch_base);

struct SaturationReport {
  // One flag per column; set where the input was -2^(n-1).
  std::vector<bool> saturated;
  std::size_t count = 0;
};

// In-place two's complement to sign-magnitude over n rows. The single value
// with no (n-1)-bit magnitude saturates to -(2^(n-1) - 1) and is flagged.
SaturationReport twos_complement_to_sm(BitPlaneArray& array, std::size_t src_base, unsigned n);

// Truncates toward zero and saturates to the n-bit signed range.
// Throws std::domain_error for NaN and infinities.
std::int64_t float_to_int(std::uint32_t bits, unsigned n);

}  // namespace sail
