#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sail {

// Weights are signed-symmetric. Activations are unsigned around an implicit
// midpoint zero point of 2^(b-1), so a tensor is fully described by its codes
// and one scale per group.
enum class TensorKind { Weight, Activation };
enum class Signedness { Signed, Unsigned };

inline constexpr std::size_t kDefaultGroupSize = 32;

bool is_supported_bit_width(unsigned bits);
void check_bit_width(unsigned bits);

constexpr Signedness signedness_of(TensorKind kind) {
  return kind == TensorKind::Weight ? Signedness::Signed : Signedness::Unsigned;
}

// Inclusive code range for a bit width.
std::int32_t min_code(unsigned bits, Signedness s);
std::int32_t max_code(unsigned bits, Signedness s);

constexpr std::size_t packed_length(std::size_t count, unsigned bits) {
  return (count * bits + 7) / 8;
}

// Little-endian bit packing: code i occupies bits [i*b, (i+1)*b) of the stream,
// bit 0 being the least significant bit of byte 0. Signed codes are stored in
// b-bit two's complement.
std::vector<std::uint8_t> pack_codes(std::span<const std::int32_t> codes, unsigned bits,
                                     Signedness s = Signedness::Unsigned);
std::vector<std::int32_t> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                       unsigned bits, Signedness s = Signedness::Unsigned);

class QuantizedTensor {
 public:
  QuantizedTensor(std::size_t rows, std::size_t cols, unsigned bit_width, std::size_t group_size,
                  TensorKind kind, std::vector<std::uint8_t> packed, std::vector<float> scales);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  unsigned bit_width() const { return bit_width_; }
  std::size_t group_size() const { return group_size_; }
  TensorKind kind() const { return kind_; }
  std::int32_t zero_point() const;

  // Groups run along a row; the last group of a row may be shorter.
  std::size_t groups_per_row() const { return (cols_ + group_size_ - 1) / group_size_; }
  std::size_t group_count() const { return rows_ * groups_per_row(); }

  const std::vector<std::uint8_t>& packed() const { return packed_; }
  const std::vector<float>& scales() const { return scales_; }

  std::int32_t code(std::size_t row, std::size_t col) const;
  float scale(std::size_t row, std::size_t col) const {
    return scales_[row * groups_per_row() + col / group_size_];
  }
  std::vector<std::int32_t> codes() const;

  bool operator==(const QuantizedTensor&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  unsigned bit_width_;
  std::size_t group_size_;
  TensorKind kind_;
  std::vector<std::uint8_t> packed_;
  std::vector<float> scales_;
};

// Per-group scale = max|v| / (2^(b-1) - 1), codes rounded to nearest even.
// An all-zero group gets scale 1.0.
QuantizedTensor quantize(std::span<const float> values, std::size_t rows, std::size_t cols,
                         unsigned bit_width, std::size_t group_size = kDefaultGroupSize,
                         TensorKind kind = TensorKind::Weight);

std::vector<float> dequantize(const QuantizedTensor& q);

}  // namespace sail
