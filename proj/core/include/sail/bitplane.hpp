#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sail/cycle_ledger.hpp"

namespace sail {

class GeometryError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class RowOp { And, Or, Xor, Not, Copy };

// One compute-capable SRAM array: a rows x cols bit grid where operands are
// stored vertically (bit i of a column operand at row base + i) and every
// operation acts on all active columns at once.
//
// Public arithmetic operations charge their closed-form cost to the current
// category. Internally they are built from micro-ops, one bitline step each,
// which are tallied in logical_ops() for audit.
class BitPlaneArray {
 public:
  static constexpr std::size_t kDefaultRows = 256;
  static constexpr std::size_t kDefaultCols = 512;

  explicit BitPlaneArray(std::size_t rows = kDefaultRows, std::size_t cols = kDefaultCols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  // --- accounting ---------------------------------------------------------

  std::uint64_t cycles() const { return cycles_; }
  const CycleLedger& ledger() const { return ledger_; }
  std::uint64_t logical_ops() const { return logical_ops_; }

  CycleCategory category() const { return category_; }
  void set_category(CycleCategory c) { category_ = c; }

  // Adds `cycles` to the counter under the current category. Ignored while an
  // UnchargedScope is open.
  void charge(std::uint64_t cycles);

  class CategoryScope {
   public:
    CategoryScope(BitPlaneArray& array, CycleCategory c) : array_(array), saved_(array.category()) {
      array_.set_category(c);
    }
    ~CategoryScope() { array_.set_category(saved_); }
    CategoryScope(const CategoryScope&) = delete;
    CategoryScope& operator=(const CategoryScope&) = delete;

   private:
    BitPlaneArray& array_;
    CycleCategory saved_;
  };

  // Suppresses charges (but not the logical-op tally) so that a composite
  // routine can charge its own formula once.
  class UnchargedScope {
   public:
    explicit UnchargedScope(BitPlaneArray& array) : array_(array) { ++array_.uncharged_depth_; }
    ~UnchargedScope() { --array_.uncharged_depth_; }
    UnchargedScope(const UnchargedScope&) = delete;
    UnchargedScope& operator=(const UnchargedScope&) = delete;

   private:
    BitPlaneArray& array_;
  };

  // --- activity mask ------------------------------------------------------

  // Writes only land in active columns. All columns are active by default.
  void set_active_columns(std::size_t begin, std::size_t end);
  void set_active_mask(std::span<const bool> active);
  void activate_all();
  bool column_active(std::size_t col) const;

  // --- architectural operations ------------------------------------------

  void row_op(RowOp op, std::size_t src_a, std::size_t src_b, std::size_t dst);

  // Writes words[i] (width bits each) into column start_col + i at rows
  // base_row .. base_row + width - 1. Charges `width` cycles, or 0 when empty.
  void transpose_in(std::span<const std::uint64_t> words, unsigned width, std::size_t base_row,
                    std::size_t start_col);

  // Test observer: no cycles.
  std::uint64_t read_column(std::size_t col, std::size_t base_row, unsigned width) const;

  // dst (n + 1 rows) = a (n rows) + b (n rows), unsigned.
  void bitserial_add(std::size_t a_base, std::size_t b_base, std::size_t dst_base, unsigned n);

  // dst (n + 1 rows) = a + b with both operands sign-extended from their own
  // widths (each at most n). Costs one n-bit add.
  void bitserial_add_signed(std::size_t a_base, unsigned a_width, std::size_t b_base,
                            unsigned b_width, std::size_t dst_base, unsigned n);

  // dst (2n rows) = a (n rows) * b (n rows), unsigned.
  void bitserial_mult(std::size_t a_base, std::size_t b_base, std::size_t dst_base, unsigned n);

  // dst (dst_width rows, two's complement, wraps) += sign_extend(src) << shift.
  // Costs one add at the destination width.
  void accumulate_shifted(std::size_t src_base, unsigned src_width, std::size_t dst_base,
                          unsigned dst_width, unsigned shift);

  // Sets `count` rows to zero, one row write each.
  void clear_rows(std::size_t base, std::size_t count);

  // --- micro-ops ----------------------------------------------------------
  // Each is one bitline step and one logical op; used by composite routines.

  void mop_row(RowOp op, std::size_t src_a, std::size_t src_b, std::size_t dst);
  void mop_set_row(std::size_t dst, bool value);
  // Loads the per-column carry latch from a row or a constant.
  void mop_carry_load(std::size_t row);
  void mop_carry_set(bool value);
  // dst = a ^ b ^ carry, carry = majority(a, b, carry). kNoRow reads zero.
  void mop_add_step(std::size_t a_row, std::size_t b_row, std::size_t dst);
  void mop_carry_store(std::size_t dst);
  // Predicate latch: subsequent writes only land where the tag is set.
  void mop_tag_load(std::size_t row);
  void mop_tag_from_carry();
  void mop_tag_clear();

  static constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

  // --- fixture access (no cycles, no logical ops) -------------------------

  bool get_bit(std::size_t row, std::size_t col) const;
  void set_bit(std::size_t row, std::size_t col, bool value);
  // Writes a value into one column ignoring the mask; test setup only.
  void poke_column(std::size_t col, std::size_t base_row, unsigned width, std::uint64_t value);
  bool carry_bit(std::size_t col) const;

 private:
  using Word = std::uint64_t;

  Word* row_ptr(std::size_t row) { return bits_.data() + row * words_; }
  const Word* row_ptr(std::size_t row) const { return bits_.data() + row * words_; }
  void check_row(std::size_t row, const char* what) const;
  void check_rows(std::size_t base, std::size_t count, const char* what) const;
  void check_col(std::size_t col, const char* what) const;
  // Blends `value` into row `dst` under mask & tag.
  void write_row(std::size_t dst, const Word* value);
  void count_op() { ++logical_ops_; }

  std::size_t rows_;
  std::size_t cols_;
  std::size_t words_;
  std::vector<Word> bits_;
  std::vector<Word> mask_;
  std::vector<Word> carry_;
  std::vector<Word> tag_;
  std::vector<Word> scratch_;
  bool tag_active_ = false;

  std::uint64_t cycles_ = 0;
  std::uint64_t logical_ops_ = 0;
  CycleLedger ledger_;
  CycleCategory category_ = CycleCategory::Other;
  int uncharged_depth_ = 0;
};

}  // namespace sail
