#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "sail/quant.hpp"

// SAILT tensor fixtures.
//
//   offset  size  field
//   0       6     magic "SAILT\0"
//   6       2     version (u16, = 1)
//   8       1     bit_width (u8)
//   9       4     rows (u32)
//   13      4     cols (u32)
//   17      4     group_size (u32)
//   21      .     packed codes, ceil(rows*cols*b/8) bytes
//   .       .     scales, one f32 per group
//
// All integers and floats are little-endian. The file does not record whether
// the codes are weights or activations; the reader supplies that.
namespace sail {

class SailtFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kSailtVersion = 1;
inline constexpr std::size_t kSailtHeaderSize = 21;

std::vector<std::uint8_t> encode_sailt(const QuantizedTensor& tensor);
QuantizedTensor decode_sailt(std::span<const std::uint8_t> bytes, TensorKind kind);

void write_sailt(const std::filesystem::path& path, const QuantizedTensor& tensor);
QuantizedTensor read_sailt(const std::filesystem::path& path, TensorKind kind);

}  // namespace sail
