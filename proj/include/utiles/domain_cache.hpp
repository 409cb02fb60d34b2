#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "utiles/types.hpp"

namespace utiles::cache {

struct Stats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t restores = 0;  // misses that re-installed a previously evicted tile
};

// Virtualizes the fixed set of hardware domains over unbounded tiles.
// Slot assignment is LRU: a resident tile's recency is bumped on attach
// and on every mediated access (touch); the least recently used resident
// is evicted when no slot is free. The unbounded mode hands out a fresh
// domain per tile and never evicts.
class DomainCache {
 public:
  using InstallFn = std::function<void(TileId, DomainId)>;
  using EvictFn = std::function<void(TileId, DomainId)>;

  static DomainCache bounded(std::vector<DomainId> slots);
  static DomainCache unbounded(DomainId first_domain);

  void set_hooks(InstallFn install, EvictFn evict);

  // Total: hit bumps recency, miss installs (evicting the LRU resident
  // if the slot table is full).
  DomainId attach(TileId tile);

  bool touch(TileId tile);   // false if tile is not resident
  bool detach(TileId tile);  // false if tile is not resident

  std::optional<DomainId> slot_of(TileId tile) const;
  std::size_t resident_count() const { return resident_.size(); }
  std::size_t capacity() const;
  bool is_unbounded() const { return unbounded_; }
  const Stats& stats() const { return stats_; }

 private:
  DomainCache() = default;

  struct Residency {
    DomainId slot;
    std::list<TileId>::iterator pos;
  };

  bool unbounded_ = false;
  DomainId next_fresh_ = 0;
  std::vector<DomainId> all_slots_;
  std::deque<DomainId> free_;
  std::list<TileId> recency_;  // front = most recently used
  std::unordered_map<TileId, Residency> resident_;
  std::set<TileId> evicted_;
  Stats stats_;
  InstallFn install_;
  EvictFn evict_;
};

}  // namespace utiles::cache
