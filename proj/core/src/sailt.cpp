#include "sail/sailt.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace sail {

namespace {

constexpr std::array<std::uint8_t, 6> kMagic = {'S', 'A', 'I', 'L', 'T', 0};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw SailtFormatError(std::string("SAILT: ") + what + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_sailt(const QuantizedTensor& tensor) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_u16(out, kSailtVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.bit_width()));
  put_u32(out, narrow_u32(tensor.rows(), "rows"));
  put_u32(out, narrow_u32(tensor.cols(), "cols"));
  put_u32(out, narrow_u32(tensor.group_size(), "group_size"));
  out.insert(out.end(), tensor.packed().begin(), tensor.packed().end());
  for (float s : tensor.scales()) put_u32(out, std::bit_cast<std::uint32_t>(s));
  return out;
}

QuantizedTensor decode_sailt(std::span<const std::uint8_t> bytes, TensorKind kind) {
  if (bytes.size() < kSailtHeaderSize) throw SailtFormatError("SAILT: truncated header");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw SailtFormatError("SAILT: bad magic");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[6] | (bytes[7] << 8));
  if (version != kSailtVersion)
    throw SailtFormatError("SAILT: unsupported version " + std::to_string(version));
  const unsigned bits = bytes[8];
  if (!is_supported_bit_width(bits))
    throw SailtFormatError("SAILT: unsupported bit width " + std::to_string(bits));
  const std::size_t rows = get_u32(bytes, 9);
  const std::size_t cols = get_u32(bytes, 13);
  const std::size_t group = get_u32(bytes, 17);
  if (rows == 0 || cols == 0 || group == 0) throw SailtFormatError("SAILT: zero dimension");

  const std::size_t code_bytes = packed_length(rows * cols, bits);
  const std::size_t groups = rows * ((cols + group - 1) / group);
  const std::size_t expected = kSailtHeaderSize + code_bytes + 4 * groups;
  if (bytes.size() != expected)
    throw SailtFormatError("SAILT: expected " + std::to_string(expected) + " bytes, got " +
                           std::to_string(bytes.size()));

  std::vector<std::uint8_t> packed(bytes.begin() + kSailtHeaderSize,
                                   bytes.begin() + kSailtHeaderSize + code_bytes);
  std::vector<float> scales(groups);
  for (std::size_t g = 0; g < groups; ++g)
    scales[g] = std::bit_cast<float>(get_u32(bytes, kSailtHeaderSize + code_bytes + 4 * g));
  try {
    return QuantizedTensor(rows, cols, bits, group, kind, std::move(packed), std::move(scales));
  } catch (const std::invalid_argument& e) {
    throw SailtFormatError(std::string("SAILT: ") + e.what());
  }
}

void write_sailt(const std::filesystem::path& path, const QuantizedTensor& tensor) {
  const auto bytes = encode_sailt(tensor);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

QuantizedTensor read_sailt(const std::filesystem::path& path, TensorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_sailt(bytes, kind);
}

}  // namespace sail
