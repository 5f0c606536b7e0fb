#include "sail/bitplane.hpp"

#include <algorithm>

#include "sail/cost.hpp"

namespace sail {

namespace {

constexpr std::size_t kWordBits = 64;

std::string geometry_message(const char* what, std::size_t value, std::size_t limit) {
  return std::string(what) + ": index " + std::to_string(value) + " exceeds limit " +
         std::to_string(limit);
}

}  // namespace

BitPlaneArray::BitPlaneArray(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_((cols + kWordBits - 1) / kWordBits) {
  if (rows == 0 || cols == 0) throw GeometryError("BitPlaneArray: empty geometry");
  bits_.assign(rows_ * words_, 0);
  mask_.assign(words_, 0);
  carry_.assign(words_, 0);
  tag_.assign(words_, 0);
  scratch_.assign(words_, 0);
  activate_all();
}

void BitPlaneArray::charge(std::uint64_t cycles) {
  if (uncharged_depth_ > 0 || cycles == 0) return;
  cycles_ += cycles;
  ledger_.charge(category_, cycles);
}

// --- mask -------------------------------------------------------------------

void BitPlaneArray::set_active_columns(std::size_t begin, std::size_t end) {
  if (begin > end || end > cols_) throw GeometryError("set_active_columns: bad column range");
  std::fill(mask_.begin(), mask_.end(), 0);
  for (std::size_t c = begin; c < end; ++c) mask_[c / kWordBits] |= Word{1} << (c % kWordBits);
}

void BitPlaneArray::set_active_mask(std::span<const bool> active) {
  if (active.size() != cols_) throw GeometryError("set_active_mask: mask length != cols");
  std::fill(mask_.begin(), mask_.end(), 0);
  for (std::size_t c = 0; c < cols_; ++c)
    if (active[c]) mask_[c / kWordBits] |= Word{1} << (c % kWordBits);
}

void BitPlaneArray::activate_all() { set_active_columns(0, cols_); }

bool BitPlaneArray::column_active(std::size_t col) const {
  check_col(col, "column_active");
  return (mask_[col / kWordBits] >> (col % kWordBits)) & 1U;
}

// --- checks -----------------------------------------------------------------

void BitPlaneArray::check_row(std::size_t row, const char* what) const {
  if (row >= rows_) throw GeometryError(geometry_message(what, row, rows_));
}

void BitPlaneArray::check_rows(std::size_t base, std::size_t count, const char* what) const {
  if (base > rows_ || count > rows_ - base)
    throw GeometryError(geometry_message(what, base + count, rows_));
}

void BitPlaneArray::check_col(std::size_t col, const char* what) const {
  if (col >= cols_) throw GeometryError(geometry_message(what, col, cols_));
}

void BitPlaneArray::write_row(std::size_t dst, const Word* value) {
  Word* d = row_ptr(dst);
  for (std::size_t w = 0; w < words_; ++w) {
    Word m = mask_[w];
    if (tag_active_) m &= tag_[w];
    d[w] = (d[w] & ~m) | (value[w] & m);
  }
}

// --- micro-ops ----------------------------------------------------------------

void BitPlaneArray::mop_row(RowOp op, std::size_t src_a, std::size_t src_b, std::size_t dst) {
  check_row(src_a, "row_op src_a");
  check_row(dst, "row_op dst");
  const bool binary = op == RowOp::And || op == RowOp::Or || op == RowOp::Xor;
  if (binary) check_row(src_b, "row_op src_b");
  const Word* a = row_ptr(src_a);
  const Word* b = binary ? row_ptr(src_b) : nullptr;
  for (std::size_t w = 0; w < words_; ++w) {
    switch (op) {
      case RowOp::And: scratch_[w] = a[w] & b[w]; break;
      case RowOp::Or: scratch_[w] = a[w] | b[w]; break;
      case RowOp::Xor: scratch_[w] = a[w] ^ b[w]; break;
      case RowOp::Not: scratch_[w] = ~a[w]; break;
      case RowOp::Copy: scratch_[w] = a[w]; break;
    }
  }
  write_row(dst, scratch_.data());
  count_op();
}

void BitPlaneArray::mop_set_row(std::size_t dst, bool value) {
  check_row(dst, "set_row");
  std::fill(scratch_.begin(), scratch_.end(), value ? ~Word{0} : Word{0});
  write_row(dst, scratch_.data());
  count_op();
}

void BitPlaneArray::mop_carry_load(std::size_t row) {
  check_row(row, "carry_load");
  std::copy_n(row_ptr(row), words_, carry_.begin());
  count_op();
}

void BitPlaneArray::mop_carry_set(bool value) {
  std::fill(carry_.begin(), carry_.end(), value ? ~Word{0} : Word{0});
  count_op();
}

void BitPlaneArray::mop_add_step(std::size_t a_row, std::size_t b_row, std::size_t dst) {
  check_row(dst, "add_step dst");
  if (a_row != kNoRow) check_row(a_row, "add_step a");
  if (b_row != kNoRow) check_row(b_row, "add_step b");
  const Word* a = a_row == kNoRow ? nullptr : row_ptr(a_row);
  const Word* b = b_row == kNoRow ? nullptr : row_ptr(b_row);
  for (std::size_t w = 0; w < words_; ++w) {
    const Word x = a ? a[w] : 0;
    const Word y = b ? b[w] : 0;
    const Word c = carry_[w];
    scratch_[w] = x ^ y ^ c;
    carry_[w] = (x & y) | (c & (x ^ y));
  }
  write_row(dst, scratch_.data());
  count_op();
}

void BitPlaneArray::mop_carry_store(std::size_t dst) {
  check_row(dst, "carry_store");
  write_row(dst, carry_.data());
  count_op();
}

void BitPlaneArray::mop_tag_load(std::size_t row) {
  check_row(row, "tag_load");
  std::copy_n(row_ptr(row), words_, tag_.begin());
  tag_active_ = true;
  count_op();
}

void BitPlaneArray::mop_tag_from_carry() {
  std::copy(carry_.begin(), carry_.end(), tag_.begin());
  tag_active_ = true;
  count_op();
}

void BitPlaneArray::mop_tag_clear() {
  tag_active_ = false;
  count_op();
}

// --- architectural operations -------------------------------------------------

void BitPlaneArray::row_op(RowOp op, std::size_t src_a, std::size_t src_b, std::size_t dst) {
  mop_row(op, src_a, src_b, dst);
  charge(1);
}

void BitPlaneArray::transpose_in(std::span<const std::uint64_t> words, unsigned width,
                                 std::size_t base_row, std::size_t start_col) {
  if (words.empty()) return;
  if (width == 0 || width > 64) throw GeometryError("transpose_in: width must be in 1..64");
  check_rows(base_row, width, "transpose_in rows");
  if (start_col > cols_ || words.size() > cols_ - start_col)
    throw GeometryError(geometry_message("transpose_in cols", start_col + words.size(), cols_));
  for (unsigned bit = 0; bit < width; ++bit) {
    Word* row = row_ptr(base_row + bit);
    for (std::size_t i = 0; i < words.size(); ++i) {
      const std::size_t col = start_col + i;
      const Word m = Word{1} << (col % kWordBits);
      if (!(mask_[col / kWordBits] & m)) continue;
      if ((words[i] >> bit) & 1U)
        row[col / kWordBits] |= m;
      else
        row[col / kWordBits] &= ~m;
    }
    count_op();
  }
  charge(cost::transpose_cycles(width));
}

std::uint64_t BitPlaneArray::read_column(std::size_t col, std::size_t base_row,
                                         unsigned width) const {
  check_col(col, "read_column");
  if (width > 64) throw GeometryError("read_column: width exceeds 64");
  check_rows(base_row, width, "read_column");
  std::uint64_t value = 0;
  for (unsigned bit = 0; bit < width; ++bit)
    value |= static_cast<std::uint64_t>(get_bit(base_row + bit, col)) << bit;
  return value;
}

void BitPlaneArray::bitserial_add(std::size_t a_base, std::size_t b_base, std::size_t dst_base,
                                  unsigned n) {
  if (n == 0) throw GeometryError("bitserial_add: zero width");
  check_rows(a_base, n, "bitserial_add a");
  check_rows(b_base, n, "bitserial_add b");
  check_rows(dst_base, n + 1, "bitserial_add dst");
  {
    UnchargedScope quiet(*this);
    mop_carry_set(false);
    for (unsigned i = 0; i < n; ++i) mop_add_step(a_base + i, b_base + i, dst_base + i);
    mop_carry_store(dst_base + n);
  }
  charge(cost::add_cycles(n));
}

void BitPlaneArray::bitserial_add_signed(std::size_t a_base, unsigned a_width,
                                         std::size_t b_base, unsigned b_width,
                                         std::size_t dst_base, unsigned n) {
  if (a_width == 0 || b_width == 0 || a_width > n || b_width > n)
    throw GeometryError("bitserial_add_signed: operand widths must be in 1..n");
  check_rows(a_base, a_width, "bitserial_add_signed a");
  check_rows(b_base, b_width, "bitserial_add_signed b");
  check_rows(dst_base, n + 1, "bitserial_add_signed dst");
  {
    UnchargedScope quiet(*this);
    mop_carry_set(false);
    for (unsigned i = 0; i <= n; ++i)
      mop_add_step(a_base + std::min(i, a_width - 1), b_base + std::min(i, b_width - 1),
                   dst_base + i);
  }
  charge(cost::add_cycles(n));
}

void BitPlaneArray::bitserial_mult(std::size_t a_base, std::size_t b_base, std::size_t dst_base,
                                   unsigned n) {
  if (n == 0) throw GeometryError("bitserial_mult: zero width");
  check_rows(a_base, n, "bitserial_mult a");
  check_rows(b_base, n, "bitserial_mult b");
  check_rows(dst_base, 2 * n, "bitserial_mult dst");
  const auto overlaps = [&](std::size_t base, std::size_t len) {
    return base < dst_base + 2 * n && dst_base < base + len;
  };
  if (overlaps(a_base, n) || overlaps(b_base, n))
    throw GeometryError("bitserial_mult: destination overlaps an operand");
  {
    UnchargedScope quiet(*this);
    clear_rows(dst_base, 2 * n);
    // Shift-and-add, each partial product predicated on one multiplier bit.
    for (unsigned j = 0; j < n; ++j) {
      mop_tag_load(b_base + j);
      mop_carry_set(false);
      for (unsigned i = 0; i < n; ++i) mop_add_step(a_base + i, dst_base + i + j, dst_base + i + j);
      mop_carry_store(dst_base + n + j);
      tag_active_ = false;
    }
  }
  charge(cost::mult_cycles(n));
}

void BitPlaneArray::accumulate_shifted(std::size_t src_base, unsigned src_width,
                                       std::size_t dst_base, unsigned dst_width,
                                       unsigned shift) {
  if (src_width == 0 || dst_width == 0) throw GeometryError("accumulate_shifted: zero width");
  check_rows(src_base, src_width, "accumulate_shifted src");
  check_rows(dst_base, dst_width, "accumulate_shifted dst");
  {
    UnchargedScope quiet(*this);
    mop_carry_set(false);
    for (unsigned i = shift; i < dst_width; ++i) {
      const unsigned j = std::min(i - shift, src_width - 1);
      mop_add_step(src_base + j, dst_base + i, dst_base + i);
    }
  }
  charge(cost::add_cycles(dst_width));
}

void BitPlaneArray::clear_rows(std::size_t base, std::size_t count) {
  check_rows(base, count, "clear_rows");
  for (std::size_t r = 0; r < count; ++r) mop_set_row(base + r, false);
  charge(count);
}

// --- fixtures -----------------------------------------------------------------

bool BitPlaneArray::get_bit(std::size_t row, std::size_t col) const {
  check_row(row, "get_bit");
  check_col(col, "get_bit");
  return (row_ptr(row)[col / kWordBits] >> (col % kWordBits)) & 1U;
}

void BitPlaneArray::set_bit(std::size_t row, std::size_t col, bool value) {
  check_row(row, "set_bit");
  check_col(col, "set_bit");
  Word& w = row_ptr(row)[col / kWordBits];
  const Word m = Word{1} << (col % kWordBits);
  w = value ? (w | m) : (w & ~m);
}

void BitPlaneArray::poke_column(std::size_t col, std::size_t base_row, unsigned width,
                                std::uint64_t value) {
  check_rows(base_row, width, "poke_column");
  for (unsigned bit = 0; bit < width; ++bit) set_bit(base_row + bit, col, (value >> bit) & 1U);
}

bool BitPlaneArray::carry_bit(std::size_t col) const {
  check_col(col, "carry_bit");
  return (carry_[col / kWordBits] >> (col % kWordBits)) & 1U;
}

}  // namespace sail
