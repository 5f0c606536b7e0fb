#pragma once

#include <cstdint>

// Closed-form cycle costs of the bit-serial fabric. Every charge made by the
// emulator comes from one of these, never from counting internal steps.
namespace sail::cost {

constexpr std::uint64_t add_cycles(std::uint64_t n) { return n + 1; }

constexpr std::uint64_t mult_cycles(std::uint64_t n) { return n * n + 5 * n - 2; }

// One row write per bit-plane of the block.
constexpr std::uint64_t transpose_cycles(std::uint64_t width) { return width; }

// ceil(3n^2 / 2) + 39(n - 1)
constexpr std::uint64_t int_to_float_cycles(std::uint64_t n) {
  return (3 * n * n + 1) / 2 + 39 * (n - 1);
}

// Conditional negate: XOR every bit with the sign, then add the sign.
constexpr std::uint64_t twos_to_sm_cycles(std::uint64_t n) { return 2 * (n + 1) + 1; }

}  // namespace sail::cost
