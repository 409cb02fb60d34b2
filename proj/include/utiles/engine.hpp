#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "utiles/access_control.hpp"
#include "utiles/allocator.hpp"
#include "utiles/domain_cache.hpp"
#include "utiles/mmu.hpp"
#include "utiles/types.hpp"

namespace utiles {

// Capability-passing argument shape shared by clone/transfer/lock/...
struct UInfoEntry {
  TileId tile = 0;
  bool plus = false;
  bool minus = false;
};
using UInfo = std::vector<UInfoEntry>;

struct FaultRecord {
  FaultKind kind;
  TaskId task = kNoTask;
  std::optional<TileId> tile;
  std::uint32_t vaddr = 0;
  std::uint64_t op = 0;  // logical operation counter at fault time
};

std::string format_fault(const FaultRecord& f);

struct AccessResult {
  enum class Status : std::uint8_t { ok, fault, rejected };
  Status status = Status::ok;
  std::uint8_t data = 0;
  FaultKind fault_kind = FaultKind::domain;
  std::size_t fault_index = 0;
  Deny reason = Deny::none;  // set when rejected (terminated caller)

  bool ok() const { return status == Status::ok; }
};

struct JoinStatus {
  bool faulted = false;
  std::optional<std::size_t> fault_index;
};

enum class TaskRunState : std::uint8_t { runnable, finished, terminated, joined };

// Snapshot taken when a tile is evicted from its hardware domain; restore
// must reproduce the pre-eviction access behaviour exactly.
struct SavedTileState {
  std::vector<std::uint32_t> sections;
  Perms ap = Perms::rw;
  Perms perms = Perms::rw;
};

struct EngineConfig {
  std::uint32_t domain_count = mmu::kHardwareDomains;
  // Domains below this index are held back for engine/kernel use and are
  // never handed to tiles. The harness runs with 0 reserved so that all
  // 16 hardware domains are cacheable.
  std::uint32_t reserved_domains = 2;
  bool unbounded_cache = false;
  // Optional explicit hand-out order of cacheable domains; used to check
  // that no observable output depends on physical domain numbers.
  std::optional<std::vector<DomainId>> slot_order;
};

// The simulated kernel: owns the label registry, the address space, the
// domain cache, tile metadata and the task table, and exposes the tile
// and thread syscall surface. Callers receive verdicts and opaque ids;
// tags, labels and physical domain numbers never cross this boundary.
class Engine {
 public:
  explicit Engine(EngineConfig cfg = {});

  // --- tasks ---------------------------------------------------------
  TaskId spawn_root_task();
  Result<TaskId> utile_clone(TaskId parent, const UInfo& uinfo);
  Result<TaskId> posix_fork(TaskId parent);  // child starts with empty labels/caps
  Result<JoinStatus> utile_join(TaskId caller, TaskId child);
  Verdict task_exit(TaskId task);
  Verdict utile_transfer_caps(TaskId giver, const UInfo& uinfo, TaskId to);
  Verdict utile_lock(TaskId task, const std::vector<TileId>& tiles);
  Verdict utile_unlock(TaskId task, const std::vector<TileId>& tiles);
  Verdict utile_declassify(TaskId task, const std::vector<TileId>& tiles);
  Verdict utile_grant(TaskId task, const std::vector<TileId>& tiles, TaskId delegate);
  Verdict utile_revoke_grant(TaskId task, const std::vector<TileId>& tiles, TaskId delegate);

  // --- tiles ---------------------------------------------------------
  Result<TileId> utile_create(TaskId task);
  Result<std::uint32_t> utile_mmap(TaskId task, TileId id, std::uint32_t addr, std::uint32_t len,
                                   Perms prot);
  Verdict utile_munmap(TaskId task, TileId id, std::uint32_t base, std::uint32_t len);
  Verdict utile_mprotect(TaskId task, TileId id, Perms prot);
  Result<Perms> utile_get(TileId id);  // capability-free by design
  Verdict utile_kill(TaskId task, TileId id);
  Result<std::uint32_t> utile_malloc(TaskId task, TileId id, std::uint32_t size);
  Verdict utile_free(TaskId task, TileId id, std::uint32_t addr);

  // --- mediated data path ---------------------------------------------
  AccessResult mediated_read(TaskId task, std::uint32_t vaddr);
  AccessResult mediated_write(TaskId task, std::uint32_t vaddr, std::uint8_t byte);
  AccessResult mediated_exec(TaskId task, std::uint32_t vaddr);

  // --- guarded plain POSIX paths ---------------------------------------
  Verdict posix_mmap(TaskId task, std::uint32_t addr, std::uint32_t len);
  Verdict posix_mprotect(TaskId task, std::uint32_t addr, std::uint32_t len);

  // --- introspection ----------------------------------------------------
  mmu::CostCounters counters() const;
  cache::Stats cache_stats() const;
  const std::vector<FaultRecord>& fault_log() const { return faults_; }
  TaskRunState task_state(TaskId t) const;
  bool task_live(TaskId t) const;
  void acknowledge_fault(TaskId t);  // scenario-runner supervisor: clear an expected fault
  Result<std::uint32_t> tile_cover_base(TileId id) const;
  std::optional<TileId> resolve_tile(std::uint32_t vaddr) const;
  std::uint8_t peek(std::uint32_t paddr) const;  // raw physical memory, test/tooling only
  std::uint64_t op_count() const { return op_counter_; }

  // Engine-internal state, reachable from tests; scenario code goes
  // through the syscall surface above.
  acl::Registry& registry() { return registry_; }
  const acl::Registry& registry() const { return registry_; }
  const mmu::AddressSpace& space() const { return space_; }
  cache::DomainCache& domain_cache() { return cache_; }

 private:
  struct TileMem {
    std::set<std::uint32_t> sections;  // 1MB-aligned bases
    Perms installed_ap = Perms::rw;    // ap actually written to section entries
    bool software_check = false;       // set for modes page tables cannot express
    std::optional<heap::TileHeap> heap;
    std::optional<SavedTileState> saved;  // present iff cached out
  };

  struct TaskState {
    TaskId parent = kNoTask;
    TaskRunState state = TaskRunState::runnable;
    std::optional<std::size_t> fault_index;
    std::set<TaskId> children;
  };

  class PhysMem {
   public:
    std::uint8_t read(std::uint32_t addr) const;
    void write(std::uint32_t addr, std::uint8_t byte);

   private:
    std::map<std::uint32_t, std::vector<std::uint8_t>> chunks_;  // by section index
  };

  void install_tile(TileId id, DomainId slot);
  void evict_tile(TileId id, DomainId slot);
  void apply_task_view(TaskId task);
  bool tile_visible(TaskId task, TileId id) const;
  AccessResult mediated_access(TaskId task, std::uint32_t vaddr, AccessKind kind,
                               std::optional<std::uint8_t> write_byte);
  AccessResult raise_fault(TaskId task, std::optional<TileId> tile, std::uint32_t vaddr,
                           FaultKind kind, bool count);
  Verdict caller_ok(TaskId task) const;
  Result<TaskId> spawn_child(TaskId parent);
  Verdict posix_guard(TaskId task, std::uint32_t addr, std::uint32_t len);

  acl::Registry registry_;
  mmu::AddressSpace space_;
  cache::DomainCache cache_;
  PhysMem mem_;
  std::map<TileId, TileMem> tiles_;
  std::map<TaskId, TaskState> tasks_;
  std::map<std::uint32_t, TileId> covers_;  // section index -> owning tile
  std::vector<FaultRecord> faults_;
  std::uint64_t op_counter_ = 0;
  TaskId next_task_ = 1;
  TileId next_tile_ = kFirstTileId;
  mutable std::mutex mu_;
};

}  // namespace utiles
