#include "utiles/allocator.hpp"

#include <stdexcept>

namespace utiles::heap {

namespace {
std::uint32_t round_up(std::uint32_t v, std::uint32_t align) {
  return (v + align - 1) & ~(align - 1);
}
}  // namespace

TileHeap::TileHeap(std::uint32_t base, std::uint32_t len) : base_(base), len_(len) {
  if (len == 0) throw std::invalid_argument("tile heap: empty region");
  if (base % kAlign != 0) throw std::invalid_argument("tile heap: misaligned base");
  mid_ = base_ + len_ / 2;
  file_free(base_, len_);
}

Result<std::uint32_t> TileHeap::malloc_block(std::uint32_t size) {
  if (size == 0) return Result<std::uint32_t>::failure(Deny::zero_len);
  std::uint32_t need = round_up(size, kAlign);
  if (need < size) return Result<std::uint32_t>::failure(Deny::bad_range);

  // First fit: head list, then tail list, both in address order.
  for (auto* list : {&head_, &tail_}) {
    for (auto it = list->begin(); it != list->end(); ++it) {
      if (it->second < need) continue;
      std::uint32_t addr = it->first;
      std::uint32_t rem = it->second - need;
      list->erase(it);
      if (rem > 0) file_free(addr + need, rem);
      allocated_[addr] = need;
      return Result<std::uint32_t>::success(addr);
    }
  }
  return Result<std::uint32_t>::failure(Deny::oom);
}

Verdict TileHeap::free_block(std::uint32_t addr) {
  auto it = allocated_.find(addr);
  if (it == allocated_.end()) {
    return Verdict::deny(is_free_start(addr) ? Deny::double_free : Deny::foreign_addr);
  }
  std::uint32_t start = addr;
  std::uint32_t size = it->second;
  allocated_.erase(it);

  // Coalesce with the free neighbour on each side, across list halves.
  bool found = false;
  auto pred = pred_block(start, &found);
  if (found) {
    start = pred->first;
    size += pred->second;
    unfile_free(pred->first);
  }
  std::uint32_t after = start + size;
  auto hit = head_.find(after);
  if (hit != head_.end()) {
    size += hit->second;
    head_.erase(hit);
  } else {
    auto tit = tail_.find(after);
    if (tit != tail_.end()) {
      size += tit->second;
      tail_.erase(tit);
    }
  }
  file_free(start, size);
  return Verdict::allow();
}

std::uint64_t TileHeap::free_bytes() const {
  std::uint64_t sum = 0;
  for (const auto& [a, s] : head_) sum += s;
  for (const auto& [a, s] : tail_) sum += s;
  return sum;
}

std::uint64_t TileHeap::allocated_bytes() const {
  std::uint64_t sum = 0;
  for (const auto& [a, s] : allocated_) sum += s;
  return sum;
}

void TileHeap::file_free(std::uint32_t addr, std::uint32_t size) {
  (addr < mid_ ? head_ : tail_)[addr] = size;
}

void TileHeap::unfile_free(std::uint32_t addr) {
  if (!head_.erase(addr)) tail_.erase(addr);
}

bool TileHeap::is_free_start(std::uint32_t addr) const {
  return head_.count(addr) != 0 || tail_.count(addr) != 0;
}

std::map<std::uint32_t, std::uint32_t>::const_iterator TileHeap::pred_block(std::uint32_t addr,
                                                                            bool* found) const {
  *found = false;
  for (const auto* list : {&head_, &tail_}) {
    auto it = list->lower_bound(addr);
    if (it == list->begin()) continue;
    --it;
    if (it->first + it->second == addr) {
      *found = true;
      return it;
    }
  }
  return head_.end();
}

}  // namespace utiles::heap
