#include "sail/typeconv.hpp"

#include <string>

#include "sail/cost.hpp"

namespace sail {

namespace {

void check_width(unsigned n) {
  if (n < kMinConvertWidth || n > kMaxConvertWidth)
    throw std::invalid_argument("int_to_float_inmem: n must be in 2..25, got " +
                                std::to_string(n));
}

}  // namespace

ConversionReport int_to_float_inmem(BitPlaneArray& array, std::size_t src_base, unsigned n,
                                    std::size_t dst_base) {
  return int_to_float_inmem(array, src_base, n, dst_base, dst_base + 32);
}

ConversionReport int_to_float_inmem(BitPlaneArray& array, std::size_t src_base, unsigned n,
                                    std::size_t dst_base, std::size_t scratch_base) {
  check_width(n);
  const std::size_t rows = array.rows();
  if (src_base > rows || n > rows - src_base) throw GeometryError("int_to_float_inmem: source");
  if (dst_base > rows || 32 > rows - dst_base) throw GeometryError("int_to_float_inmem: dest");
  const std::size_t scratch = int_to_float_scratch_rows(n);
  if (scratch_base > rows || scratch > rows - scratch_base)
    throw GeometryError("int_to_float_inmem: scratch");

  const auto a = [&](unsigned i) { return src_base + i; };
  const auto r = [&](unsigned i) { return dst_base + i; };
  // C lives in q(0..n-2); C + 1 needs the extra row q(n-1).
  const auto q = [&](unsigned i) { return scratch_base + i; };
  const std::size_t d = scratch_base + n;
  const auto p = [&](unsigned i) { return scratch_base + n + 1 + i; };

  const std::uint64_t ops_before = array.logical_ops();
  {
    BitPlaneArray::UnchargedScope quiet(array);

    // Leading-one scan: C gets ones at and below the magnitude's leading one,
    // D ends up set only for nonzero magnitudes.
    for (unsigned step = 0; step + 1 < n; ++step) {
      const unsigned i = n - 2 - step;
      if (step == 0)
        array.mop_row(RowOp::Copy, a(i), a(i), d);
      else
        array.mop_row(RowOp::Or, d, a(i), d);
      array.mop_row(RowOp::Copy, d, d, q(i));
    }

    // Biased exponent = 126 + popcount(C). Seeding with 126 * D makes the
    // zero input come out as exponent 0.
    array.mop_set_row(r(23), false);
    for (unsigned k = 1; k <= 6; ++k) array.mop_row(RowOp::Copy, d, d, r(23 + k));
    array.mop_set_row(r(30), false);
    for (unsigned i = 0; i + 1 < n; ++i) {
      array.mop_carry_load(q(i));
      for (unsigned k = 0; k < 8; ++k) array.mop_add_step(r(23 + k), BitPlaneArray::kNoRow, r(23 + k));
    }

    array.mop_row(RowOp::And, a(n - 1), d, r(31));

    // C + 1 held in n bits. Reversed over n bits it is the alignment factor
    // 2^(n-2-p) for a leading one at p.
    array.mop_carry_set(true);
    for (unsigned i = 0; i + 1 < n; ++i) array.mop_add_step(q(i), BitPlaneArray::kNoRow, q(i));
    array.mop_carry_store(q(n - 1));
    const auto reversed = [&](unsigned j) { return q(n - 1 - j); };

    // A := A * reverse(C + 1). The product is below 2^(n-1), so only the low
    // n-1 bits are formed.
    for (unsigned i = 0; i + 1 < n; ++i) array.mop_set_row(p(i), false);
    for (unsigned j = 0; j + 1 < n; ++j) {
      array.mop_tag_load(reversed(j));
      array.mop_carry_set(false);
      for (unsigned i = 0; i + j + 1 < n; ++i) array.mop_add_step(a(i), p(i + j), p(i + j));
    }
    array.mop_tag_clear();

    // Mantissa: r(25-n+i) = a_i for i in 0..n-3, the hidden one dropped.
    for (unsigned m = 0; m < 23; ++m) {
      const int i = static_cast<int>(m) - (25 - static_cast<int>(n));
      if (i >= 0 && i <= static_cast<int>(n) - 3)
        array.mop_row(RowOp::Copy, p(static_cast<unsigned>(i)), p(static_cast<unsigned>(i)), r(m));
      else
        array.mop_set_row(r(m), false);
    }
  }

  ConversionReport report;
  report.charged_cycles = cost::int_to_float_cycles(n);
  report.logical_ops = array.logical_ops() - ops_before;
  BitPlaneArray::CategoryScope scope(array, CycleCategory::TypeConvert);
  array.charge(report.charged_cycles);
  return report;
}

SaturationReport twos_complement_to_sm(BitPlaneArray& array, std::size_t src_base, unsigned n) {
  if (n < 2 || n > 64) throw std::invalid_argument("twos_complement_to_sm: n must be in 2..64");
  if (src_base > array.rows() || n > array.rows() - src_base)
    throw GeometryError("twos_complement_to_sm: geometry");
  const std::size_t sign = src_base + n - 1;

  SaturationReport report;
  report.saturated.assign(array.cols(), false);
  {
    BitPlaneArray::UnchargedScope quiet(array);
    for (unsigned i = 0; i + 1 < n; ++i) array.mop_row(RowOp::Xor, src_base + i, sign, src_base + i);
    array.mop_carry_load(sign);
    for (unsigned i = 0; i + 1 < n; ++i)
      array.mop_add_step(src_base + i, BitPlaneArray::kNoRow, src_base + i);
    // A carry out of the magnitude means the input was -2^(n-1).
    for (std::size_t c = 0; c < array.cols(); ++c) {
      if (array.column_active(c) && array.carry_bit(c)) {
        report.saturated[c] = true;
        ++report.count;
      }
    }
    array.mop_tag_from_carry();
    for (unsigned i = 0; i + 1 < n; ++i) array.mop_set_row(src_base + i, true);
    array.mop_tag_clear();
  }
  BitPlaneArray::CategoryScope scope(array, CycleCategory::TypeConvert);
  array.charge(cost::twos_to_sm_cycles(n));
  return report;
}

std::int64_t float_to_int(std::uint32_t bits, unsigned n) {
  if (n < 2 || n > 63) throw std::invalid_argument("float_to_int: n must be in 2..63");
  const bool negative = (bits >> 31) != 0;
  const unsigned exponent = (bits >> 23) & 0xFFu;
  const std::uint32_t fraction = bits & 0x7FFFFFu;
  if (exponent == 0xFFu)
    throw std::domain_error(fraction ? "float_to_int: NaN input" : "float_to_int: infinite input");

  const std::int64_t max_value = (std::int64_t{1} << (n - 1)) - 1;
  const std::int64_t min_value = -max_value - 1;

  std::uint64_t magnitude = 0;
  bool overflow = false;
  if (exponent >= 127) {
    const unsigned e = exponent - 127;  // value in [2^e, 2^(e+1))
    const std::uint64_t significand = fraction | (1u << 23);
    if (e >= 63)
      overflow = true;
    else if (e >= 23)
      magnitude = significand << (e - 23);
    else
      magnitude = significand >> (23 - e);
    if (e >= n) overflow = true;
  }
  // exponent < 127: |value| < 1 truncates to zero (this covers subnormals).

  if (negative) {
    if (overflow || magnitude > static_cast<std::uint64_t>(max_value) + 1) return min_value;
    return -static_cast<std::int64_t>(magnitude);
  }
  if (overflow || magnitude > static_cast<std::uint64_t>(max_value)) return max_value;
  return static_cast<std::int64_t>(magnitude);
}

}  // namespace sail
