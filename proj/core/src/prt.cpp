#include "sail/prt.hpp"

#include <algorithm>
#include <stdexcept>

namespace sail {

PatternReuseTable::PatternReuseTable(std::uint64_t per_hit_saving, std::size_t capacity)
    : entries_(capacity), per_hit_saving_(per_hit_saving) {
  if (capacity == 0) throw std::invalid_argument("PatternReuseTable: capacity must be positive");
}

std::uint32_t PatternReuseTable::hash(std::uint32_t pattern) {
  std::uint32_t h = 2166136261u;
  for (int i = 0; i < 4; ++i) {
    h ^= (pattern >> (8 * i)) & 0xFFu;
    h *= 16777619u;
  }
  return h;
}

PatternReuseTable::Entry* PatternReuseTable::find(std::uint32_t pattern, std::uint32_t tag,
                                                  bool count_collisions) {
  Entry* match = nullptr;
  bool collided = false;
  for (auto& e : entries_) {
    if (!e.valid || e.tag != tag) continue;
    if (e.key == pattern)
      match = &e;
    else
      collided = true;
  }
  if (collided && count_collisions) ++stats_.collisions;
  return match;
}

const std::vector<std::int32_t>* PatternReuseTable::lookup(std::uint32_t pattern) {
  Entry* e = find(pattern, hash(pattern), true);
  if (!e) {
    ++stats_.misses;
    return nullptr;
  }
  ++stats_.hits;
  stats_.cycles_saved += per_hit_saving_;
  e->lru_stamp = ++clock_;
  return &e->value;
}

void PatternReuseTable::insert(std::uint32_t pattern, std::span<const std::int32_t> value) {
  const std::uint32_t tag = hash(pattern);
  Entry* slot = find(pattern, tag, false);
  if (!slot) {
    auto free_it = std::find_if(entries_.begin(), entries_.end(), [](const Entry& e) { return !e.valid; });
    if (free_it != entries_.end()) {
      slot = &*free_it;
    } else {
      slot = &*std::min_element(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.lru_stamp < b.lru_stamp;
      });
      ++stats_.evictions;
    }
  }
  slot->valid = true;
  slot->tag = tag;
  slot->key = pattern;
  slot->lru_stamp = ++clock_;
  slot->value.assign(value.begin(), value.end());
  ++stats_.inserts;
}

void PatternReuseTable::invalidate_generation() {
  for (auto& e : entries_) e.valid = false;
  ++generation_;
}

std::size_t PatternReuseTable::valid_entries() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const Entry& e) { return e.valid; }));
}

}  // namespace sail
