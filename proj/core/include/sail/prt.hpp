#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sail {

struct PrtStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t inserts = 0;
  std::uint64_t evictions = 0;
  // Lookups where a valid entry carried the same tag but a different key.
  std::uint64_t collisions = 0;
  std::uint64_t cycles_saved = 0;

  std::uint64_t lookups() const { return hits + misses; }
  double hit_rate() const { return lookups() ? static_cast<double>(hits) / lookups() : 0.0; }
};

// Fully associative, LRU-replaced cache of activation-group patterns. A key is
// the whole activation group (nbw codes of act_bits each, at most 32 bits) and
// the value is that group's partial sum for every output column. Tags are a
// 32-bit FNV-1a hash, but the full key is compared too, so a tag collision can
// never return the wrong partial sum.
class PatternReuseTable {
 public:
  static constexpr std::size_t kDefaultCapacity = 32;

  explicit PatternReuseTable(std::uint64_t per_hit_saving = 0,
                             std::size_t capacity = kDefaultCapacity);

  // Returns the cached partial sums on a hit, nullptr on a miss.
  const std::vector<std::int32_t>* lookup(std::uint32_t pattern);

  // Overwrites an existing key in place; otherwise fills a free entry or
  // evicts the least recently used one.
  void insert(std::uint32_t pattern, std::span<const std::int32_t> value);

  // Drops every entry (the LUT they were computed from is gone). Stats stay.
  void invalidate_generation();

  std::size_t capacity() const { return entries_.size(); }
  std::size_t valid_entries() const;
  std::uint64_t generation() const { return generation_; }

  std::uint64_t per_hit_saving() const { return per_hit_saving_; }
  void set_per_hit_saving(std::uint64_t cycles) { per_hit_saving_ = cycles; }

  const PrtStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  static std::uint32_t hash(std::uint32_t pattern);

 private:
  struct Entry {
    bool valid = false;
    std::uint32_t tag = 0;
    std::uint32_t key = 0;
    std::uint64_t lru_stamp = 0;
    std::vector<std::int32_t> value;
  };

  Entry* find(std::uint32_t pattern, std::uint32_t tag, bool count_collisions);

  std::vector<Entry> entries_;
  std::uint64_t clock_ = 0;
  std::uint64_t generation_ = 0;
  std::uint64_t per_hit_saving_;
  PrtStats stats_;
};

}  // namespace sail
