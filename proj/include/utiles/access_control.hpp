#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>

#include "utiles/types.hpp"

namespace utiles::acl {

// Tags are 30-bit kernel-assigned ids; the upper two bits of the 32-bit
// encoding carry the plus/minus capability when a tag sits in a
// capability set. Id 0 is reserved.
inline constexpr std::uint32_t kTagIdBits = 30;
inline constexpr std::uint32_t kMaxTagId = (1u << kTagIdBits) - 1;
inline constexpr std::uint32_t kPlusBit = 1u << 31;
inline constexpr std::uint32_t kMinusBit = 1u << 30;

struct Tag {
  std::uint32_t id = 0;

  bool valid() const { return id != 0 && id <= kMaxTagId; }
  auto operator<=>(const Tag&) const = default;
};

class Label {
 public:
  Label() = default;
  Label(std::initializer_list<std::uint32_t> ids) : tags_(ids) {}

  bool contains(Tag t) const { return tags_.count(t.id) != 0; }
  void insert(Tag t) { tags_.insert(t.id); }
  void erase(Tag t) { tags_.erase(t.id); }
  bool empty() const { return tags_.empty(); }
  std::size_t size() const { return tags_.size(); }
  bool subset_of(const Label& other) const;

  const std::set<std::uint32_t>& ids() const { return tags_; }
  bool operator==(const Label&) const = default;

 private:
  std::set<std::uint32_t> tags_;
};

// Secrecy may flow from src to dst iff src's tags are a subset of dst's.
bool can_flow_secrecy(const Label& src, const Label& dst);
// Integrity flow uses the reversed containment: dst's tags within src's.
bool can_flow_integrity(const Label& src, const Label& dst);

class CapabilitySet {
 public:
  bool has_plus(Tag t) const { return (word(t) & kPlusBit) != 0; }
  bool has_minus(Tag t) const { return (word(t) & kMinusBit) != 0; }
  void add(Tag t, bool plus, bool minus);
  void remove(Tag t) { words_.erase(t.id); }
  // The stored 32-bit form: id with plus/minus in the top two bits.
  // Absent tags read as 0 -- lookup of an absent tag yields (false, false).
  std::uint32_t word(Tag t) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_map<std::uint32_t, std::uint32_t> words_;
};

// A thread may move its label from `from` to `to` iff it holds plus
// capabilities for every added tag and minus capabilities for every
// dropped tag.
bool can_change_label(const CapabilitySet& caps, const Label& from, const Label& to);

// Label registry: the single source of truth for principal security
// state. Callers outside the engine receive verdicts and opaque ids
// only; label contents never cross this boundary by value.
class Registry {
 public:
  struct TaskEntry {
    Label secrecy;
    Label integrity;
    CapabilitySet caps;
    std::set<TileId> owned_tiles;
  };

  struct TileEntry {
    Tag tag;
    TaskId owner = kNoTask;
    Label secrecy;  // exactly the tile's one tag
    Perms perms = Perms::rw;
    bool locked = false;
    TaskId lock_holder = kNoTask;
    Tag lock_tag;  // shadow tag recorded while locked, audit only
    std::set<TaskId> declassified_for;
    std::set<TaskId> acts_for;  // delegates holding authority edges
  };

  // Tag allocation. Ids are a monotone counter and are never reused.
  Result<Tag> new_tag(TaskId owner);
  Result<Tag> mint_unowned_tag();  // no capability grant (lock shadow tags)
  void debug_set_next_tag(std::uint32_t next) { next_tag_ = next; }

  // Principal lifecycle.
  void register_task(TaskId t);
  bool task_known(TaskId t) const { return tasks_.count(t) != 0; }
  Verdict register_tile(TileId id, TaskId owner, Tag tag, Perms initial);
  void drop_tile(TileId id);
  bool tile_known(TileId t) const { return tiles_.count(t) != 0; }

  // LSM-style hooks.
  Result<bool> is_task_labeled(TaskId t) const;
  Verdict set_task_label(TaskId t, const Label& secrecy);
  Verdict set_task_integrity(TaskId t, const Label& integrity);
  Result<Label> copy_user_label(std::span<const std::uint32_t> descriptor) const;
  Result<bool> check_labels_allowed(TaskId src, TaskId dst) const;

  // Policy checks.
  Verdict check_access(TaskId task, TileId tile, AccessKind kind) const;
  Verdict declassify(TaskId task, TileId tile);
  Verdict grant(TaskId authority, TaskId delegate, TileId tile);
  Verdict revoke_grant(TaskId authority, TaskId delegate, TileId tile);
  bool acts_for(TaskId task, TileId tile) const;
  bool is_authority(TaskId task, TileId tile) const;  // owner or acts-for

  // Capability plumbing for the task layer.
  Verdict add_caps(TaskId task, Tag tag, bool plus, bool minus);
  bool has_plus(TaskId task, Tag tag) const;
  bool has_minus(TaskId task, Tag tag) const;

  // Tile policy state, engine-internal.
  Result<Tag> tile_tag(TileId id) const;
  Result<TaskId> tile_owner(TileId id) const;
  Result<Perms> tile_perms(TileId id) const;
  Verdict set_tile_perms(TileId id, Perms p);
  bool tile_locked(TileId id) const;
  TaskId tile_lock_holder(TileId id) const;
  Verdict lock_tile(TileId id, TaskId locker);
  Verdict unlock_tile(TileId id);
  bool declassified_for(TileId id, TaskId task) const;

  const TaskEntry* find_task(TaskId t) const;
  const TileEntry* find_tile(TileId id) const;

 private:
  TaskEntry* task(TaskId t);
  TileEntry* tile(TileId id);
  const TaskEntry* task(TaskId t) const;
  const TileEntry* tile(TileId id) const;

  std::map<TaskId, TaskEntry> tasks_;
  std::map<TileId, TileEntry> tiles_;
  std::uint32_t next_tag_ = 1;  // id 0 reserved
};

}  // namespace utiles::acl
