#include "utiles/engine.hpp"

#include <cstdio>
#include <stdexcept>

namespace utiles {

std::string format_fault(const FaultRecord& f) {
  char buf[96];
  char tile[16];
  if (f.tile) {
    std::snprintf(tile, sizeof(tile), "%u", *f.tile);
  } else {
    std::snprintf(tile, sizeof(tile), "-");
  }
  std::snprintf(buf, sizeof(buf), "FAULT %s %u %s 0x%08x %llu", to_string(f.kind), f.task, tile,
                f.vaddr, static_cast<unsigned long long>(f.op));
  return buf;
}

std::uint8_t Engine::PhysMem::read(std::uint32_t addr) const {
  auto it = chunks_.find(mmu::section_index(addr));
  if (it == chunks_.end()) return 0;
  return it->second[addr & (mmu::kSectionBytes - 1)];
}

void Engine::PhysMem::write(std::uint32_t addr, std::uint8_t byte) {
  auto& chunk = chunks_[mmu::section_index(addr)];
  if (chunk.empty()) chunk.assign(mmu::kSectionBytes, 0);
  chunk[addr & (mmu::kSectionBytes - 1)] = byte;
}

Engine::Engine(EngineConfig cfg)
    : space_(cfg.domain_count),
      cache_(cfg.unbounded_cache
                 ? cache::DomainCache::unbounded(cfg.reserved_domains)
                 : cache::DomainCache::bounded([&] {
                     std::vector<DomainId> slots;
                     if (cfg.slot_order) {
                       slots = *cfg.slot_order;
                     } else {
                       for (DomainId d = cfg.reserved_domains; d < cfg.domain_count; ++d) {
                         slots.push_back(d);
                       }
                     }
                     if (slots.empty()) throw std::invalid_argument("no cacheable domains");
                     return slots;
                   }())) {
  cache_.set_hooks([this](TileId t, DomainId d) { install_tile(t, d); },
                   [this](TileId t, DomainId d) { evict_tile(t, d); });
}

void Engine::install_tile(TileId id, DomainId slot) {
  auto& tm = tiles_.at(id);
  space_.dacr().ensure_domains(slot + 1);
  // Live metadata is authoritative: a cached-out tile may have been
  // mprotected or partially unmapped since its state was saved.
  for (std::uint32_t vb : tm.sections) {
    space_.map_section(vb, vb, slot, tm.installed_ap);
  }
  tm.saved.reset();
}

void Engine::evict_tile(TileId id, DomainId slot) {
  (void)slot;
  auto& tm = tiles_.at(id);
  SavedTileState s;
  s.sections.assign(tm.sections.begin(), tm.sections.end());
  s.ap = tm.installed_ap;
  auto p = registry_.tile_perms(id);
  s.perms = p.ok() ? *p : Perms::none;
  tm.saved = std::move(s);
  // Quarantine: unmap the victim's sections so no stale-domain window exists.
  for (std::uint32_t vb : tm.sections) {
    space_.unmap_section(vb);
  }
}

bool Engine::tile_visible(TaskId task, TileId id) const {
  auto tag = registry_.tile_tag(id);
  if (!tag.ok()) return false;
  if (!registry_.has_plus(task, *tag)) return false;
  if (registry_.tile_locked(id)) return false;
  auto perms = registry_.tile_perms(id);
  return perms.ok() && *perms != Perms::none;
}

void Engine::apply_task_view(TaskId task) {
  mmu::Dacr view(space_.dacr().domain_count());
  for (const auto& [id, tm] : tiles_) {
    auto slot = cache_.slot_of(id);
    if (!slot) continue;
    view.set(*slot, tile_visible(task, id) ? mmu::DomainMode::client
                                           : mmu::DomainMode::no_access);
  }
  space_.write_dacr(view);
}

AccessResult Engine::raise_fault(TaskId task, std::optional<TileId> tile, std::uint32_t vaddr,
                                 FaultKind kind, bool count) {
  if (count) {
    if (kind == FaultKind::permission) {
      space_.counters().perm_faults += 1;
    } else if (kind == FaultKind::domain) {
      space_.counters().domain_faults += 1;
    }
  }
  faults_.push_back(FaultRecord{kind, task, tile, vaddr, op_counter_});
  auto& ts = tasks_.at(task);
  ts.state = TaskRunState::terminated;
  ts.fault_index = faults_.size() - 1;
  AccessResult r;
  r.status = AccessResult::Status::fault;
  r.fault_kind = kind;
  r.fault_index = faults_.size() - 1;
  return r;
}

Verdict Engine::caller_ok(TaskId task) const {
  auto it = tasks_.find(task);
  if (it == tasks_.end()) return Verdict::deny(Deny::unknown_task);
  if (it->second.state != TaskRunState::runnable) return Verdict::deny(Deny::terminated);
  return Verdict::allow();
}

AccessResult Engine::mediated_access(TaskId task, std::uint32_t vaddr, AccessKind kind,
                                     std::optional<std::uint8_t> write_byte) {
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) {
    AccessResult r;
    r.status = AccessResult::Status::rejected;
    r.reason = v.reason;
    return r;
  }

  auto cover = covers_.find(mmu::section_index(vaddr));
  if (cover == covers_.end()) {
    // Plain memory: tile-independent code pays no policy or walk cost.
    AccessResult r;
    if (write_byte) {
      mem_.write(vaddr, *write_byte);
    } else {
      r.data = mem_.read(vaddr);
    }
    return r;
  }

  TileId tile = cover->second;
  Verdict v = registry_.check_access(task, tile, kind);
  if (!v.ok()) {
    // The policy layer fronts the hardware: software-checked permission
    // modes fault here before any table walk happens.
    FaultKind fk = v.reason == Deny::perm_mismatch ? FaultKind::permission : FaultKind::domain;
    return raise_fault(task, tile, vaddr, fk, /*count=*/true);
  }

  cache_.attach(tile);  // residency + recency bump on every mediated access
  apply_task_view(task);
  mmu::AccessOutcome out = space_.access(vaddr, kind);
  if (!out.ok()) {
    FaultKind fk = FaultKind::translation;
    if (out.kind == mmu::AccessOutcome::Kind::domain_fault) fk = FaultKind::domain;
    if (out.kind == mmu::AccessOutcome::Kind::permission_fault) fk = FaultKind::permission;
    return raise_fault(task, tile, vaddr, fk, /*count=*/false);
  }

  AccessResult r;
  if (write_byte) {
    mem_.write(out.paddr, *write_byte);
  } else {
    r.data = mem_.read(out.paddr);
  }
  return r;
}

AccessResult Engine::mediated_read(TaskId task, std::uint32_t vaddr) {
  std::lock_guard<std::mutex> g(mu_);
  return mediated_access(task, vaddr, AccessKind::read, std::nullopt);
}

AccessResult Engine::mediated_write(TaskId task, std::uint32_t vaddr, std::uint8_t byte) {
  std::lock_guard<std::mutex> g(mu_);
  return mediated_access(task, vaddr, AccessKind::write, byte);
}

AccessResult Engine::mediated_exec(TaskId task, std::uint32_t vaddr) {
  std::lock_guard<std::mutex> g(mu_);
  return mediated_access(task, vaddr, AccessKind::exec, std::nullopt);
}

Verdict Engine::posix_guard(TaskId task, std::uint32_t addr, std::uint32_t len) {
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  if (len == 0) return Verdict::deny(Deny::zero_len);
  std::uint64_t end = mmu::section_round_up(static_cast<std::uint64_t>(addr) + len);
  for (std::uint64_t idx = mmu::section_index(addr); idx < (end >> mmu::kSectionShift); ++idx) {
    auto it = covers_.find(static_cast<std::uint32_t>(idx));
    if (it != covers_.end()) {
      // Unauthorized plain-path operation touching a tile cover: log and deny.
      faults_.push_back(FaultRecord{FaultKind::policy, task, it->second,
                                    static_cast<std::uint32_t>(idx) << mmu::kSectionShift,
                                    op_counter_});
      return Verdict::deny(Deny::policy);
    }
  }
  return Verdict::allow();
}

Verdict Engine::posix_mmap(TaskId task, std::uint32_t addr, std::uint32_t len) {
  std::lock_guard<std::mutex> g(mu_);
  return posix_guard(task, addr, len);
}

Verdict Engine::posix_mprotect(TaskId task, std::uint32_t addr, std::uint32_t len) {
  std::lock_guard<std::mutex> g(mu_);
  return posix_guard(task, addr, len);
}

mmu::CostCounters Engine::counters() const {
  std::lock_guard<std::mutex> g(mu_);
  return space_.counters();
}

cache::Stats Engine::cache_stats() const {
  std::lock_guard<std::mutex> g(mu_);
  return cache_.stats();
}

TaskRunState Engine::task_state(TaskId t) const {
  std::lock_guard<std::mutex> g(mu_);
  auto it = tasks_.find(t);
  if (it == tasks_.end()) throw std::out_of_range("unknown task");
  return it->second.state;
}

bool Engine::task_live(TaskId t) const {
  std::lock_guard<std::mutex> g(mu_);
  auto it = tasks_.find(t);
  return it != tasks_.end() && it->second.state == TaskRunState::runnable;
}

void Engine::acknowledge_fault(TaskId t) {
  std::lock_guard<std::mutex> g(mu_);
  auto it = tasks_.find(t);
  if (it == tasks_.end()) return;
  if (it->second.state == TaskRunState::terminated) {
    it->second.state = TaskRunState::runnable;
    it->second.fault_index.reset();
  }
}

Result<std::uint32_t> Engine::tile_cover_base(TileId id) const {
  std::lock_guard<std::mutex> g(mu_);
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return Result<std::uint32_t>::failure(Deny::unknown_id);
  if (it->second.sections.empty()) return Result<std::uint32_t>::failure(Deny::not_mapped);
  return Result<std::uint32_t>::success(*it->second.sections.begin());
}

std::optional<TileId> Engine::resolve_tile(std::uint32_t vaddr) const {
  std::lock_guard<std::mutex> g(mu_);
  auto it = covers_.find(mmu::section_index(vaddr));
  if (it == covers_.end()) return std::nullopt;
  return it->second;
}

std::uint8_t Engine::peek(std::uint32_t paddr) const {
  std::lock_guard<std::mutex> g(mu_);
  return mem_.read(paddr);
}

}  // namespace utiles
