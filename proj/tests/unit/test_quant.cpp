#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sail/quant.hpp"
#include "sail/sailt.hpp"

using namespace sail;

TEST(Quant, SupportedWidths) {
  for (unsigned b : {2u, 3u, 4u, 5u, 6u, 8u}) EXPECT_TRUE(is_supported_bit_width(b));
  for (unsigned b : {0u, 1u, 7u, 9u, 16u}) EXPECT_FALSE(is_supported_bit_width(b));
  EXPECT_THROW(check_bit_width(7), std::invalid_argument);
  EXPECT_EQ(min_code(4, Signedness::Signed), -8);
  EXPECT_EQ(max_code(4, Signedness::Signed), 7);
  EXPECT_EQ(max_code(4, Signedness::Unsigned), 15);
}

TEST(Quant, PackExamples) {
  const std::vector<std::int32_t> codes = {1, 2, 3};
  EXPECT_EQ(pack_codes(codes, 2), std::vector<std::uint8_t>{0b00111001});
  EXPECT_TRUE(pack_codes({}, 4).empty());
  const std::vector<std::int32_t> neg = {-1, 0, -8, 7};
  const auto p = pack_codes(neg, 4, Signedness::Signed);
  EXPECT_EQ(p, (std::vector<std::uint8_t>{0x0F, 0x78}));
  EXPECT_EQ(unpack_codes(p, 4, 4, Signedness::Signed), neg);
  const std::vector<std::int32_t> bad = {4};
  EXPECT_THROW(pack_codes(bad, 2), std::out_of_range);
  const std::vector<std::int32_t> bad_signed = {2};
  EXPECT_THROW(pack_codes(bad_signed, 2, Signedness::Signed), std::out_of_range);
}

TEST(Quant, PackRoundTripProperty) {
  std::mt19937 rng(8);
  for (unsigned b : {2u, 3u, 4u, 5u, 6u, 8u})
    for (auto s : {Signedness::Signed, Signedness::Unsigned}) {
      std::uniform_int_distribution<std::int32_t> d(min_code(b, s), max_code(b, s));
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::int32_t> codes(rng() % 300);
        for (auto& c : codes) c = d(rng);
        const auto bytes = pack_codes(codes, b, s);
        EXPECT_EQ(bytes.size(), packed_length(codes.size(), b));
        EXPECT_EQ(unpack_codes(bytes, codes.size(), b, s), codes);
      }
    }
}

TEST(Quant, ZeroMatrixFallsBackToUnitScale) {
  std::vector<float> z(64, 0.0f);
  const auto q = quantize(z, 4, 16, 4);
  for (auto c : q.codes()) EXPECT_EQ(c, 0);
  for (auto s : q.scales()) EXPECT_EQ(s, 1.0f);
  for (auto v : dequantize(q)) EXPECT_EQ(v, 0.0f);
}

TEST(Quant, EndpointsMapToExtremes) {
  const std::vector<float> v = {-1.0f, 1.0f};
  const auto q = quantize(v, 1, 2, 4);
  EXPECT_FLOAT_EQ(q.scale(0, 0), 1.0f / 7.0f);
  EXPECT_EQ(q.code(0, 0), -7);
  EXPECT_EQ(q.code(0, 1), 7);
  EXPECT_FLOAT_EQ(dequantize(q)[1], 1.0f);
}

TEST(Quant, RoundTripWithinHalfScale) {
  std::mt19937 rng(4);
  std::normal_distribution<float> d(0.0f, 2.0f);
  for (unsigned b : {2u, 3u, 4u, 5u, 6u, 8u})
    for (auto kind : {TensorKind::Weight, TensorKind::Activation}) {
      std::vector<float> v(64 * 64);
      for (auto& x : v) x = d(rng);
      const auto q = quantize(v, 64, 64, b, 32, kind);
      const auto back = dequantize(q);
      for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t c = 0; c < 64; ++c) {
          const float s = q.scale(r, c);
          EXPECT_GT(s, 0.0f);
          EXPECT_LE(std::fabs(back[r * 64 + c] - v[r * 64 + c]), s / 2 * (1 + 1e-5f)) << b;
          const auto code = q.code(r, c);
          EXPECT_GE(code, min_code(b, signedness_of(kind)));
          EXPECT_LE(code, max_code(b, signedness_of(kind)));
        }
    }
}

TEST(Quant, TailGroupIsShorter) {
  std::vector<float> v(2 * 40);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i % 40) - 20.0f;
  const auto q = quantize(v, 2, 40, 8, 32);
  EXPECT_EQ(q.groups_per_row(), 2u);
  EXPECT_EQ(q.group_count(), 4u);
  EXPECT_FLOAT_EQ(q.scale(0, 35), 19.0f / 127.0f);
}

TEST(Quant, ActivationsCarryZeroPoint) {
  const std::vector<float> v = {-1.0f, 0.0f, 1.0f};
  const auto q = quantize(v, 1, 3, 8, 32, TensorKind::Activation);
  EXPECT_EQ(q.zero_point(), 128);
  EXPECT_EQ(q.code(0, 0), 1);
  EXPECT_EQ(q.code(0, 1), 128);
  EXPECT_EQ(q.code(0, 2), 255);
}

TEST(Quant, RejectsBadInput) {
  std::vector<float> v = {1.0f, NAN};
  EXPECT_THROW(quantize(v, 1, 2, 4), std::invalid_argument);
  EXPECT_THROW(quantize({}, 0, 0, 4), std::invalid_argument);
  std::vector<float> ok = {1.0f, 2.0f};
  EXPECT_THROW(quantize(ok, 1, 2, 7), std::invalid_argument);
  EXPECT_THROW(QuantizedTensor(1, 2, 4, 32, TensorKind::Weight, {0}, {-1.0f}), std::invalid_argument);
  EXPECT_THROW(QuantizedTensor(1, 2, 4, 32, TensorKind::Weight, {0, 0}, {1.0f}), std::invalid_argument);
}

// --- SAILT --------------------------------------------------------------------

TEST(Sailt, HeaderLayoutIsBitExact) {
  const std::vector<float> v = {-1.0f, 1.0f, 0.5f};
  const auto q = quantize(v, 1, 3, 4, 32);
  const auto bytes = encode_sailt(q);
  ASSERT_EQ(bytes.size(), kSailtHeaderSize + 2 + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "SAILT");
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[7], 0);
  EXPECT_EQ(bytes[8], 4);
  EXPECT_EQ(bytes[9], 1);    // rows
  EXPECT_EQ(bytes[13], 3);   // cols
  EXPECT_EQ(bytes[17], 32);  // group size
  EXPECT_EQ(decode_sailt(bytes, TensorKind::Weight), q);
}

TEST(Sailt, FileRoundTripAndErrors) {
  std::mt19937 rng(6);
  std::normal_distribution<float> d;
  std::vector<float> v(16 * 48);
  for (auto& x : v) x = d(rng);
  const auto q = quantize(v, 16, 48, 3, 32, TensorKind::Activation);
  const auto path = std::filesystem::temp_directory_path() / "sail_test_fixture.sailt";
  write_sailt(path, q);
  EXPECT_EQ(read_sailt(path, TensorKind::Activation), q);
  std::filesystem::remove(path);

  auto bytes = encode_sailt(q);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_sailt(bad, TensorKind::Activation), SailtFormatError);
  bad = bytes;
  bad[6] = 2;
  EXPECT_THROW(decode_sailt(bad, TensorKind::Activation), SailtFormatError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_sailt(bad, TensorKind::Activation), SailtFormatError);
  bad = bytes;
  bad[8] = 7;
  EXPECT_THROW(decode_sailt(bad, TensorKind::Activation), SailtFormatError);
  EXPECT_THROW(read_sailt("/nonexistent/dir/x.sailt", TensorKind::Weight), std::runtime_error);
}
