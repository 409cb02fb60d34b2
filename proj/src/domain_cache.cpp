#include "utiles/domain_cache.hpp"

#include <limits>
#include <stdexcept>

namespace utiles::cache {

DomainCache DomainCache::bounded(std::vector<DomainId> slots) {
  if (slots.empty()) throw std::invalid_argument("domain cache needs at least one slot");
  DomainCache c;
  c.all_slots_ = slots;
  c.free_.assign(slots.begin(), slots.end());
  return c;
}

DomainCache DomainCache::unbounded(DomainId first_domain) {
  DomainCache c;
  c.unbounded_ = true;
  c.next_fresh_ = first_domain;
  return c;
}

void DomainCache::set_hooks(InstallFn install, EvictFn evict) {
  install_ = std::move(install);
  evict_ = std::move(evict);
}

DomainId DomainCache::attach(TileId tile) {
  auto it = resident_.find(tile);
  if (it != resident_.end()) {
    stats_.hits += 1;
    recency_.splice(recency_.begin(), recency_, it->second.pos);
    return it->second.slot;
  }

  stats_.misses += 1;
  DomainId slot;
  if (unbounded_) {
    slot = next_fresh_++;
  } else if (!free_.empty()) {
    slot = free_.front();
    free_.pop_front();
  } else {
    TileId victim = recency_.back();
    recency_.pop_back();
    auto vit = resident_.find(victim);
    slot = vit->second.slot;
    resident_.erase(vit);
    evicted_.insert(victim);
    stats_.evictions += 1;
    if (evict_) evict_(victim, slot);
  }

  if (evicted_.erase(tile)) stats_.restores += 1;
  recency_.push_front(tile);
  resident_[tile] = Residency{slot, recency_.begin()};
  if (install_) install_(tile, slot);
  return slot;
}

bool DomainCache::touch(TileId tile) {
  auto it = resident_.find(tile);
  if (it == resident_.end()) return false;
  recency_.splice(recency_.begin(), recency_, it->second.pos);
  return true;
}

bool DomainCache::detach(TileId tile) {
  evicted_.erase(tile);
  auto it = resident_.find(tile);
  if (it == resident_.end()) return false;
  recency_.erase(it->second.pos);
  if (!unbounded_) free_.push_back(it->second.slot);
  resident_.erase(it);
  return true;
}

std::optional<DomainId> DomainCache::slot_of(TileId tile) const {
  auto it = resident_.find(tile);
  if (it == resident_.end()) return std::nullopt;
  return it->second.slot;
}

std::size_t DomainCache::capacity() const {
  return unbounded_ ? std::numeric_limits<std::size_t>::max() : all_slots_.size();
}

}  // namespace utiles::cache
