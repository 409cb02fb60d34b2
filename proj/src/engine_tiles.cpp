#include "utiles/engine.hpp"

namespace utiles {

namespace {

// Page tables cannot express write-only or exec-only; those modes install
// the nearest expressible ap and rely on the policy-layer software check.
Perms nearest_installable(Perms p) {
  if (p == Perms::wo) return Perms::rw;
  if (p == Perms::xo) return Perms::rx;
  return p;
}

bool needs_software_check(Perms p) { return p == Perms::wo || p == Perms::xo; }

}  // namespace

Result<TileId> Engine::utile_create(TaskId task) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return Result<TileId>::failure(v.reason);

  auto tag = registry_.new_tag(task);
  if (!tag.ok()) return Result<TileId>::failure(tag.reason);

  TileId id = next_tile_++;
  registry_.register_tile(id, task, *tag, Perms::rw);
  tiles_.emplace(id, TileMem{});
  return Result<TileId>::success(id);
}

Result<std::uint32_t> Engine::utile_mmap(TaskId task, TileId id, std::uint32_t addr,
                                         std::uint32_t len, Perms prot) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return Result<std::uint32_t>::failure(v.reason);
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Result<std::uint32_t>::failure(Deny::unknown_id);
  if (len == 0) return Result<std::uint32_t>::failure(Deny::zero_len);
  std::uint64_t end = mmu::section_round_up(static_cast<std::uint64_t>(addr) + len);
  if (end > (1ull << 32)) return Result<std::uint32_t>::failure(Deny::bad_range);

  if (auto v = registry_.check_access(task, id, AccessKind::layout_change); !v.ok()) {
    return Result<std::uint32_t>::failure(v.reason);
  }

  std::uint32_t cover_lo = mmu::section_base(addr);
  std::uint32_t first = mmu::section_index(cover_lo);
  std::uint32_t last = static_cast<std::uint32_t>(end >> mmu::kSectionShift);
  for (std::uint32_t si = first; si < last; ++si) {
    auto hit = covers_.find(si);
    if (hit != covers_.end()) {
      return Result<std::uint32_t>::failure(hit->second == id ? Deny::double_map : Deny::overlap);
    }
  }

  TileMem& tm = it->second;
  DomainId slot = cache_.attach(id);

  Perms nap = nearest_installable(prot);
  if (!tm.sections.empty() && tm.installed_ap != nap) {
    for (std::uint32_t vb : tm.sections) space_.set_section_ap(vb, nap);
  }
  tm.installed_ap = nap;
  tm.software_check = needs_software_check(prot);
  registry_.set_tile_perms(id, prot);

  for (std::uint32_t si = first; si < last; ++si) {
    std::uint32_t vb = si << mmu::kSectionShift;
    space_.map_section(vb, vb, slot, nap);
    covers_[si] = id;
    tm.sections.insert(vb);
  }

  if (!tm.heap) {
    tm.heap.emplace(cover_lo, static_cast<std::uint32_t>(end - cover_lo));
  }
  return Result<std::uint32_t>::success(cover_lo);
}

Verdict Engine::utile_munmap(TaskId task, TileId id, std::uint32_t base, std::uint32_t len) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Verdict::deny(Deny::unknown_id);
  if (!mmu::section_aligned(base)) return Verdict::deny(Deny::misaligned);
  if (len == 0) return Verdict::deny(Deny::zero_len);
  std::uint64_t end = mmu::section_round_up(static_cast<std::uint64_t>(base) + len);
  if (end > (1ull << 32)) return Verdict::deny(Deny::bad_range);

  if (auto v = registry_.check_access(task, id, AccessKind::layout_change); !v.ok()) return v;

  std::uint32_t first = mmu::section_index(base);
  std::uint32_t last = static_cast<std::uint32_t>(end >> mmu::kSectionShift);
  for (std::uint32_t si = first; si < last; ++si) {
    auto hit = covers_.find(si);
    if (hit == covers_.end() || hit->second != id) return Verdict::deny(Deny::not_mapped);
  }

  TileMem& tm = it->second;
  bool resident = cache_.slot_of(id).has_value();
  for (std::uint32_t si = first; si < last; ++si) {
    std::uint32_t vb = si << mmu::kSectionShift;
    if (resident) space_.unmap_section(vb);
    covers_.erase(si);
    tm.sections.erase(vb);
  }
  if (tm.heap && base < tm.heap->base() + tm.heap->len() && end > tm.heap->base()) {
    tm.heap.reset();  // heap region torn down with its mapping
  }
  return Verdict::allow();
}

Verdict Engine::utile_mprotect(TaskId task, TileId id, Perms prot) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Verdict::deny(Deny::unknown_id);
  if (auto v = registry_.check_access(task, id, AccessKind::layout_change); !v.ok()) return v;

  TileMem& tm = it->second;
  auto cur = registry_.tile_perms(id);
  if (cur.ok() && *cur == prot) return Verdict::allow();

  auto slot = cache_.slot_of(id);
  bool fast = prot == Perms::none || (prot == Perms::rw && tm.installed_ap == Perms::rw);
  if (fast) {
    // Expressible as a domain-mode switch: one DACR write, no TLB traffic.
    if (slot) {
      space_.set_domain_access(*slot, prot == Perms::none ? mmu::DomainMode::no_access
                                                          : mmu::DomainMode::client);
    }
    if (prot == Perms::rw) tm.software_check = false;
  } else {
    // Emulated: rewrite every section's ap, one TLB flush each.
    Perms nap = nearest_installable(prot);
    if (slot) {
      for (std::uint32_t vb : tm.sections) space_.set_section_ap(vb, nap);
      if (space_.dacr().mode(*slot) != mmu::DomainMode::client) {
        space_.set_domain_access(*slot, mmu::DomainMode::client);
      }
    }
    tm.installed_ap = nap;
    tm.software_check = needs_software_check(prot);
  }
  registry_.set_tile_perms(id, prot);
  return Verdict::allow();
}

Result<Perms> Engine::utile_get(TileId id) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  return registry_.tile_perms(id);
}

Verdict Engine::utile_kill(TaskId task, TileId id) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Verdict::deny(Deny::unknown_id);
  auto owner = registry_.tile_owner(id);
  if (!owner.ok() || *owner != task) return Verdict::deny(Deny::not_owner);
  if (registry_.tile_locked(id)) return Verdict::deny(Deny::locked);

  TileMem& tm = it->second;
  bool resident = cache_.slot_of(id).has_value();
  for (std::uint32_t vb : tm.sections) {
    if (resident) space_.unmap_section(vb);
    covers_.erase(mmu::section_index(vb));
  }
  cache_.detach(id);
  registry_.drop_tile(id);
  tiles_.erase(it);
  return Verdict::allow();
}

Result<std::uint32_t> Engine::utile_malloc(TaskId task, TileId id, std::uint32_t size) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return Result<std::uint32_t>::failure(v.reason);
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Result<std::uint32_t>::failure(Deny::unknown_id);
  if (auto v = registry_.check_access(task, id, AccessKind::write); !v.ok()) {
    return Result<std::uint32_t>::failure(v.reason);
  }
  if (!it->second.heap) return Result<std::uint32_t>::failure(Deny::no_heap);
  return it->second.heap->malloc_block(size);
}

Verdict Engine::utile_free(TaskId task, TileId id, std::uint32_t addr) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Verdict::deny(Deny::unknown_id);
  if (auto v = registry_.check_access(task, id, AccessKind::write); !v.ok()) return v;
  if (!it->second.heap) return Verdict::deny(Deny::no_heap);
  return it->second.heap->free_block(addr);
}

}  // namespace utiles
