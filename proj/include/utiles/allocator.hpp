#pragma once

#include <cstdint>
#include <map>

#include "utiles/types.hpp"

namespace utiles::heap {

// In-tile heap over a mapped region, managed through two free lists:
// blocks starting in the lower half of the region file under the head
// list, blocks starting in the upper half under the tail list. Both
// lists stay address-ordered and allocation searches head first, tail
// second, which together is first fit in address order. All metadata
// lives in this side table, never inside the region, so scenario writes
// cannot corrupt allocator state.
class TileHeap {
 public:
  static constexpr std::uint32_t kAlign = 16;

  TileHeap(std::uint32_t base, std::uint32_t len);

  Result<std::uint32_t> malloc_block(std::uint32_t size);
  Verdict free_block(std::uint32_t addr);

  std::uint32_t base() const { return base_; }
  std::uint32_t len() const { return len_; }
  std::uint64_t free_bytes() const;
  std::uint64_t allocated_bytes() const;

  const std::map<std::uint32_t, std::uint32_t>& head_free() const { return head_; }
  const std::map<std::uint32_t, std::uint32_t>& tail_free() const { return tail_; }
  const std::map<std::uint32_t, std::uint32_t>& allocations() const { return allocated_; }

 private:
  void file_free(std::uint32_t addr, std::uint32_t size);
  void unfile_free(std::uint32_t addr);
  bool is_free_start(std::uint32_t addr) const;
  // The free block ending exactly at addr, if any.
  std::map<std::uint32_t, std::uint32_t>::const_iterator pred_block(std::uint32_t addr,
                                                                    bool* found) const;

  std::uint32_t base_;
  std::uint32_t len_;
  std::uint32_t mid_;
  std::map<std::uint32_t, std::uint32_t> head_;       // addr -> size, starts in [base, mid)
  std::map<std::uint32_t, std::uint32_t> tail_;       // addr -> size, starts in [mid, end)
  std::map<std::uint32_t, std::uint32_t> allocated_;  // addr -> size
};

}  // namespace utiles::heap
