#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace sail {

enum class CycleCategory : std::size_t {
  LutBuild = 0,
  LookupAccumulate,
  TypeConvert,
  Transpose,
  Aggregate,
  Load,
  Other,
};

inline constexpr std::size_t kCycleCategoryCount = 7;

inline constexpr std::array<CycleCategory, kCycleCategoryCount> kAllCycleCategories = {
    CycleCategory::LutBuild,    CycleCategory::LookupAccumulate, CycleCategory::TypeConvert,
    CycleCategory::Transpose,   CycleCategory::Aggregate,        CycleCategory::Load,
    CycleCategory::Other,
};

constexpr std::string_view category_name(CycleCategory c) {
  switch (c) {
    case CycleCategory::LutBuild: return "lut_build";
    case CycleCategory::LookupAccumulate: return "lookup_accumulate";
    case CycleCategory::TypeConvert: return "type_convert";
    case CycleCategory::Transpose: return "transpose";
    case CycleCategory::Aggregate: return "aggregate";
    case CycleCategory::Load: return "load";
    case CycleCategory::Other: return "other";
  }
  return "unknown";
}

// Per-category cycle totals. The total is always the sum of the categories,
// so a ledger can never disagree with itself.
class CycleLedger {
 public:
  void charge(CycleCategory c, std::uint64_t cycles) { totals_[index(c)] += cycles; }

  std::uint64_t operator[](CycleCategory c) const { return totals_[index(c)]; }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (auto v : totals_) sum += v;
    return sum;
  }

  CycleLedger& operator+=(const CycleLedger& other) {
    for (std::size_t i = 0; i < kCycleCategoryCount; ++i) totals_[i] += other.totals_[i];
    return *this;
  }

  friend CycleLedger operator+(CycleLedger a, const CycleLedger& b) { return a += b; }

  // Ledger of the interval between two snapshots; `later` must dominate `earlier`.
  friend CycleLedger operator-(const CycleLedger& later, const CycleLedger& earlier) {
    CycleLedger out;
    for (std::size_t i = 0; i < kCycleCategoryCount; ++i)
      out.totals_[i] = later.totals_[i] - earlier.totals_[i];
    return out;
  }

  CycleLedger scaled(std::uint64_t factor) const {
    CycleLedger out;
    for (std::size_t i = 0; i < kCycleCategoryCount; ++i) out.totals_[i] = totals_[i] * factor;
    return out;
  }

  bool operator==(const CycleLedger&) const = default;

 private:
  static constexpr std::size_t index(CycleCategory c) { return static_cast<std::size_t>(c); }

  std::array<std::uint64_t, kCycleCategoryCount> totals_{};
};

}  // namespace sail
