#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "sail/bitplane.hpp"
#include "sail/cost.hpp"
#include "sail/typeconv.hpp"

using namespace sail;

namespace {

// Independent scalar reference: exact float of the sign-magnitude value.
std::uint32_t ref_bits(bool sign, std::uint32_t mag) {
  if (mag == 0) return 0;
  const float v = static_cast<float>(mag);
  return std::bit_cast<std::uint32_t>(sign ? -v : v);
}

std::uint32_t convert_one(unsigned n, bool sign, std::uint32_t mag) {
  BitPlaneArray a;
  a.poke_column(0, 0, n, mag | (static_cast<std::uint64_t>(sign) << (n - 1)));
  int_to_float_inmem(a, 0, n, 32);
  return static_cast<std::uint32_t>(a.read_column(0, 32, 32));
}

}  // namespace

TEST(TypeConv, WorkedExamples) {
  EXPECT_EQ(convert_one(8, false, 5), 0x40A00000u);
  EXPECT_EQ(convert_one(8, true, 3), 0xC0400000u);
  EXPECT_EQ(convert_one(8, false, 0), 0x00000000u);
  EXPECT_EQ(convert_one(8, true, 0), 0x00000000u);
}

TEST(TypeConv, ExhaustiveTwelveBit) {
  BitPlaneArray a;
  const unsigned n = 12;
  for (std::uint32_t base = 0; base < (1u << n); base += 512) {
    for (std::uint32_t c = 0; c < 512; ++c) a.poke_column(c, 0, n, base + c);
    int_to_float_inmem(a, 0, n, 40);
    for (std::uint32_t c = 0; c < 512; ++c) {
      const std::uint32_t v = base + c;
      ASSERT_EQ(a.read_column(c, 40, 32), ref_bits(v >> (n - 1), v & 0x7FF)) << v;
    }
  }
}

TEST(TypeConv, LeadingOneAtTopPositionAndExponentIdentity) {
  for (unsigned n = 2; n <= 25; ++n) {
    for (unsigned p = 0; p + 1 < n; ++p) {
      const std::uint32_t mag = 1u << p;
      const std::uint32_t bits = convert_one(n, false, mag);
      EXPECT_EQ(bits, ref_bits(false, mag)) << n << " " << p;
      EXPECT_EQ((bits >> 23) & 0xFF, p + 127) << n << " " << p;
    }
  }
}

TEST(TypeConv, ChargesClosedFormAndStaysNearIt) {
  for (unsigned n = 2; n <= 25; ++n) {
    BitPlaneArray a;
    const auto rep = int_to_float_inmem(a, 0, n, 32);
    const std::uint64_t formula = (3u * n * n + 1) / 2 + 39u * (n - 1);
    EXPECT_EQ(rep.charged_cycles, formula);
    EXPECT_EQ(a.ledger()[CycleCategory::TypeConvert], formula);
    EXPECT_LE(static_cast<double>(rep.logical_ops), 1.25 * static_cast<double>(formula)) << n;
  }
  EXPECT_EQ(cost::int_to_float_cycles(16), 969u);
}

TEST(TypeConv, ParallelEqualsColumnByColumn) {
  std::mt19937 rng(9);
  const unsigned n = 20;
  BitPlaneArray wide;
  std::vector<std::uint32_t> vals(512);
  for (std::size_t c = 0; c < 512; ++c) {
    vals[c] = rng() & ((1u << n) - 1);
    wide.poke_column(c, 0, n, vals[c]);
  }
  int_to_float_inmem(wide, 0, n, 32);
  for (std::size_t c = 0; c < 512; c += 37)
    EXPECT_EQ(wide.read_column(c, 32, 32), convert_one(n, vals[c] >> (n - 1), vals[c] & ((1u << (n - 1)) - 1)));
}

TEST(TypeConv, SourceRowsSurviveAndWidthIsChecked) {
  BitPlaneArray a;
  a.poke_column(3, 0, 10, 0x2AB);
  int_to_float_inmem(a, 0, 10, 32);
  EXPECT_EQ(a.read_column(3, 0, 10), 0x2ABu);
  EXPECT_THROW(int_to_float_inmem(a, 0, 1, 32), std::invalid_argument);
  EXPECT_THROW(int_to_float_inmem(a, 0, 26, 32), std::invalid_argument);
  EXPECT_THROW(int_to_float_inmem(a, 0, 25, 240), GeometryError);
}

TEST(TypeConv, TwosComplementToSignMagnitude) {
  BitPlaneArray a(16, 256);
  const unsigned n = 8;
  for (std::uint32_t v = 0; v < 256; ++v) a.poke_column(v, 0, n, v);
  const auto rep = twos_complement_to_sm(a, 0, n);
  EXPECT_EQ(a.cycles(), 2u * (n + 1) + 1);
  EXPECT_EQ(rep.count, 1u);
  for (std::uint32_t v = 0; v < 256; ++v) {
    const std::int32_t value = static_cast<std::int8_t>(v);
    const std::uint64_t sm = a.read_column(v, 0, n);
    const std::int32_t back = (sm >> 7) ? -static_cast<std::int32_t>(sm & 0x7F) : static_cast<std::int32_t>(sm);
    if (value == -128) {
      EXPECT_TRUE(rep.saturated[v]);
      EXPECT_EQ(back, -127);
    } else {
      EXPECT_FALSE(rep.saturated[v]);
      EXPECT_EQ(back, value) << v;
    }
  }
}

TEST(TypeConv, SmallTwosComplementCases) {
  BitPlaneArray a(8, 2);
  a.poke_column(0, 0, 4, 0b1111);
  a.poke_column(1, 0, 4, 0b0101);
  twos_complement_to_sm(a, 0, 4);
  EXPECT_EQ(a.read_column(0, 0, 4), 0b1001u);
  EXPECT_EQ(a.read_column(1, 0, 4), 0b0101u);
}

TEST(TypeConv, FloatToIntTruncatesAndSaturates) {
  auto bits = [](float f) { return std::bit_cast<std::uint32_t>(f); };
  EXPECT_EQ(float_to_int(bits(5.9f), 8), 5);
  EXPECT_EQ(float_to_int(bits(-3.2f), 8), -3);
  EXPECT_EQ(float_to_int(bits(1000.0f), 8), 127);
  EXPECT_EQ(float_to_int(bits(-1000.0f), 8), -128);
  EXPECT_EQ(float_to_int(bits(-0.0f), 8), 0);
  EXPECT_EQ(float_to_int(bits(1e-40f), 8), 0);
  EXPECT_THROW(float_to_int(bits(NAN), 8), std::domain_error);
  EXPECT_THROW(float_to_int(bits(INFINITY), 8), std::domain_error);

  std::mt19937 rng(2);
  std::uniform_real_distribution<float> d(-40000.0f, 40000.0f);
  for (int i = 0; i < 10000; ++i) {
    const float f = d(rng);
    const double t = std::trunc(static_cast<double>(f));
    const auto want = static_cast<std::int64_t>(std::clamp(t, -32768.0, 32767.0));
    ASSERT_EQ(float_to_int(bits(f), 16), want) << f;
  }
}
