#include "sail/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sail {

bool is_supported_bit_width(unsigned bits) {
  switch (bits) {
    case 2: case 3: case 4: case 5: case 6: case 8: return true;
    default: return false;
  }
}

void check_bit_width(unsigned bits) {
  if (!is_supported_bit_width(bits))
    throw std::invalid_argument("unsupported bit width " + std::to_string(bits) +
                                " (expected 2, 3, 4, 5, 6 or 8)");
}

std::int32_t min_code(unsigned bits, Signedness s) {
  return s == Signedness::Signed ? -(std::int32_t{1} << (bits - 1)) : 0;
}

std::int32_t max_code(unsigned bits, Signedness s) {
  return s == Signedness::Signed ? (std::int32_t{1} << (bits - 1)) - 1
                                 : (std::int32_t{1} << bits) - 1;
}

std::vector<std::uint8_t> pack_codes(std::span<const std::int32_t> codes, unsigned bits,
                                     Signedness s) {
  if (bits == 0 || bits > 8) throw std::invalid_argument("pack_codes: bit width must be 1..8");
  const std::int32_t lo = min_code(bits, s);
  const std::int32_t hi = max_code(bits, s);
  const std::uint32_t field = (1u << bits) - 1;
  std::vector<std::uint8_t> out(packed_length(codes.size(), bits), 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < codes.size(); ++i, pos += bits) {
    const std::int32_t c = codes[i];
    if (c < lo || c > hi)
      throw std::out_of_range("pack_codes: code " + std::to_string(c) + " at index " +
                              std::to_string(i) + " outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
    const std::uint32_t v = static_cast<std::uint32_t>(c) & field;
    out[pos / 8] |= static_cast<std::uint8_t>(v << (pos % 8));
    if (pos % 8 + bits > 8) out[pos / 8 + 1] |= static_cast<std::uint8_t>(v >> (8 - pos % 8));
  }
  return out;
}

namespace {

std::int32_t extract(std::span<const std::uint8_t> bytes, std::size_t index, unsigned bits,
                     Signedness s) {
  const std::size_t pos = index * bits;
  std::uint32_t v = bytes[pos / 8] >> (pos % 8);
  if (pos % 8 + bits > 8) v |= static_cast<std::uint32_t>(bytes[pos / 8 + 1]) << (8 - pos % 8);
  v &= (1u << bits) - 1;
  if (s == Signedness::Signed && (v >> (bits - 1)) != 0) return static_cast<std::int32_t>(v) - (1 << bits);
  return static_cast<std::int32_t>(v);
}

}  // namespace

std::vector<std::int32_t> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                       unsigned bits, Signedness s) {
  if (bits == 0 || bits > 8) throw std::invalid_argument("unpack_codes: bit width must be 1..8");
  if (bytes.size() < packed_length(count, bits))
    throw std::invalid_argument("unpack_codes: byte stream too short");
  std::vector<std::int32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = extract(bytes, i, bits, s);
  return out;
}

// --- QuantizedTensor ----------------------------------------------------------

QuantizedTensor::QuantizedTensor(std::size_t rows, std::size_t cols, unsigned bit_width,
                                 std::size_t group_size, TensorKind kind,
                                 std::vector<std::uint8_t> packed, std::vector<float> scales)
    : rows_(rows),
      cols_(cols),
      bit_width_(bit_width),
      group_size_(group_size),
      kind_(kind),
      packed_(std::move(packed)),
      scales_(std::move(scales)) {
  check_bit_width(bit_width_);
  if (rows_ == 0 || cols_ == 0) throw std::invalid_argument("QuantizedTensor: empty tensor");
  if (group_size_ == 0) throw std::invalid_argument("QuantizedTensor: group size must be positive");
  if (packed_.size() != packed_length(rows_ * cols_, bit_width_))
    throw std::invalid_argument("QuantizedTensor: packed length mismatch");
  if (scales_.size() != group_count())
    throw std::invalid_argument("QuantizedTensor: scale count mismatch");
  for (float s : scales_)
    if (!(s > 0.0f) || !std::isfinite(s))
      throw std::invalid_argument("QuantizedTensor: scales must be positive and finite");
}

std::int32_t QuantizedTensor::zero_point() const {
  return kind_ == TensorKind::Activation ? (std::int32_t{1} << (bit_width_ - 1)) : 0;
}

std::int32_t QuantizedTensor::code(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols_) throw std::out_of_range("QuantizedTensor::code");
  return extract(packed_, row * cols_ + col, bit_width_, signedness_of(kind_));
}

std::vector<std::int32_t> QuantizedTensor::codes() const {
  return unpack_codes(packed_, rows_ * cols_, bit_width_, signedness_of(kind_));
}

// --- quantize / dequantize ------------------------------------------------------

QuantizedTensor quantize(std::span<const float> values, std::size_t rows, std::size_t cols,
                         unsigned bit_width, std::size_t group_size, TensorKind kind) {
  check_bit_width(bit_width);
  if (rows == 0 || cols == 0 || values.empty()) throw std::invalid_argument("quantize: empty tensor");
  if (values.size() != rows * cols) throw std::invalid_argument("quantize: size != rows * cols");
  if (group_size == 0) throw std::invalid_argument("quantize: group size must be positive");
  for (float v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite input");

  const std::int32_t qmax = (std::int32_t{1} << (bit_width - 1)) - 1;
  const std::int32_t offset = kind == TensorKind::Activation ? (std::int32_t{1} << (bit_width - 1)) : 0;
  const std::size_t groups_per_row = (cols + group_size - 1) / group_size;

  std::vector<std::int32_t> codes(rows * cols);
  std::vector<float> scales(rows * groups_per_row);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t g = 0; g < groups_per_row; ++g) {
      const std::size_t begin = r * cols + g * group_size;
      const std::size_t end = r * cols + std::min(cols, (g + 1) * group_size);
      float amax = 0.0f;
      for (std::size_t i = begin; i < end; ++i) amax = std::max(amax, std::fabs(values[i]));
      const float scale = amax > 0.0f ? amax / static_cast<float>(qmax) : 1.0f;
      scales[r * groups_per_row + g] = scale;
      for (std::size_t i = begin; i < end; ++i) {
        // nearbyint honours the default round-to-nearest-even mode.
        double q = std::nearbyint(static_cast<double>(values[i]) / static_cast<double>(scale));
        q = std::clamp(q, static_cast<double>(-qmax), static_cast<double>(qmax));
        codes[i] = static_cast<std::int32_t>(q) + offset;
      }
    }
  }
  return QuantizedTensor(rows, cols, bit_width, group_size, kind,
                         pack_codes(codes, bit_width, signedness_of(kind)), std::move(scales));
}

std::vector<float> dequantize(const QuantizedTensor& q) {
  const auto codes = q.codes();
  const std::int32_t zp = q.zero_point();
  std::vector<float> out(codes.size());
  for (std::size_t r = 0; r < q.rows(); ++r)
    for (std::size_t c = 0; c < q.cols(); ++c) {
      const std::size_t i = r * q.cols() + c;
      out[i] = static_cast<float>(codes[i] - zp) * q.scale(r, c);
    }
  return out;
}

}  // namespace sail
