#include "utiles/access_control.hpp"

#include <algorithm>

namespace utiles::acl {

bool Label::subset_of(const Label& other) const {
  return std::includes(other.tags_.begin(), other.tags_.end(), tags_.begin(), tags_.end());
}

bool can_flow_secrecy(const Label& src, const Label& dst) { return src.subset_of(dst); }

bool can_flow_integrity(const Label& src, const Label& dst) { return dst.subset_of(src); }

void CapabilitySet::add(Tag t, bool plus, bool minus) {
  if (!plus && !minus) return;  // a stored capability always carries a bit
  std::uint32_t& w = words_[t.id];
  w = t.id | (w & (kPlusBit | kMinusBit));
  if (plus) w |= kPlusBit;
  if (minus) w |= kMinusBit;
}

std::uint32_t CapabilitySet::word(Tag t) const {
  auto it = words_.find(t.id);
  return it == words_.end() ? 0 : it->second;
}

bool can_change_label(const CapabilitySet& caps, const Label& from, const Label& to) {
  for (std::uint32_t id : to.ids()) {
    if (from.contains(Tag{id})) continue;
    if (!caps.has_plus(Tag{id})) return false;
  }
  for (std::uint32_t id : from.ids()) {
    if (to.contains(Tag{id})) continue;
    if (!caps.has_minus(Tag{id})) return false;
  }
  return true;
}

Result<Tag> Registry::new_tag(TaskId owner) {
  auto* te = task(owner);
  if (!te) return Result<Tag>::failure(Deny::unknown_task);
  auto minted = mint_unowned_tag();
  if (!minted.ok()) return minted;
  te->caps.add(*minted, true, true);
  return minted;
}

Result<Tag> Registry::mint_unowned_tag() {
  if (next_tag_ > kMaxTagId) return Result<Tag>::failure(Deny::tag_exhausted);
  return Result<Tag>::success(Tag{next_tag_++});
}

void Registry::register_task(TaskId t) { tasks_.emplace(t, TaskEntry{}); }

Verdict Registry::register_tile(TileId id, TaskId owner, Tag tag, Perms initial) {
  auto* te = task(owner);
  if (!te) return Verdict::deny(Deny::unknown_task);
  TileEntry e;
  e.tag = tag;
  e.owner = owner;
  e.secrecy.insert(tag);
  e.perms = initial;
  tiles_.emplace(id, std::move(e));
  te->owned_tiles.insert(id);
  te->secrecy.insert(tag);
  return Verdict::allow();
}

void Registry::drop_tile(TileId id) {
  auto it = tiles_.find(id);
  if (it == tiles_.end()) return;
  auto* owner = task(it->second.owner);
  if (owner) {
    owner->owned_tiles.erase(id);
    owner->secrecy.erase(it->second.tag);
  }
  tiles_.erase(it);
}

Result<bool> Registry::is_task_labeled(TaskId t) const {
  const auto* te = task(t);
  if (!te) return Result<bool>::failure(Deny::unknown_task);
  return Result<bool>::success(!te->secrecy.empty() || !te->integrity.empty());
}

Verdict Registry::set_task_label(TaskId t, const Label& secrecy) {
  auto* te = task(t);
  if (!te) return Verdict::deny(Deny::unknown_task);
  te->secrecy = secrecy;
  return Verdict::allow();
}

Verdict Registry::set_task_integrity(TaskId t, const Label& integrity) {
  auto* te = task(t);
  if (!te) return Verdict::deny(Deny::unknown_task);
  te->integrity = integrity;
  return Verdict::allow();
}

Result<Label> Registry::copy_user_label(std::span<const std::uint32_t> descriptor) const {
  Label l;
  for (std::uint32_t id : descriptor) {
    Tag t{id};
    if (!t.valid()) return Result<Label>::failure(Deny::unknown_id);
    l.insert(t);
  }
  return Result<Label>::success(std::move(l));
}

Result<bool> Registry::check_labels_allowed(TaskId src, TaskId dst) const {
  const auto* a = task(src);
  const auto* b = task(dst);
  if (!a || !b) return Result<bool>::failure(Deny::unknown_task);
  return Result<bool>::success(can_flow_secrecy(a->secrecy, b->secrecy) &&
                               can_flow_integrity(a->integrity, b->integrity));
}

Verdict Registry::check_access(TaskId t, TileId id, AccessKind kind) const {
  const auto* te = task(t);
  if (!te) return Verdict::deny(Deny::unknown_task);
  const auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);

  if (!te->caps.has_plus(tl->tag)) return Verdict::deny(Deny::no_plus_cap);
  if (tl->locked) return Verdict::deny(Deny::locked);

  if (kind == AccessKind::layout_change) {
    bool authority = te->caps.has_minus(tl->tag) || tl->acts_for.count(t) != 0 ||
                     tl->declassified_for.count(t) != 0;
    return authority ? Verdict::allow() : Verdict::deny(Deny::no_authority);
  }
  if (!perm_allows(tl->perms, kind)) return Verdict::deny(Deny::perm_mismatch);
  return Verdict::allow();
}

Verdict Registry::declassify(TaskId t, TileId id) {
  const auto* te = task(t);
  if (!te) return Verdict::deny(Deny::unknown_task);
  auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);
  if (!te->caps.has_minus(tl->tag) && tl->acts_for.count(t) == 0) {
    return Verdict::deny(Deny::no_authority);
  }
  tl->declassified_for.insert(t);
  return Verdict::allow();
}

Verdict Registry::grant(TaskId authority, TaskId delegate, TileId id) {
  auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);
  if (!task(delegate)) return Verdict::deny(Deny::unknown_task);
  if (!is_authority(authority, id)) return Verdict::deny(Deny::no_authority);
  tl->acts_for.insert(delegate);  // idempotent
  return Verdict::allow();
}

Verdict Registry::revoke_grant(TaskId authority, TaskId delegate, TileId id) {
  auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);
  if (!task(delegate)) return Verdict::deny(Deny::unknown_task);
  if (!is_authority(authority, id)) return Verdict::deny(Deny::no_authority);
  tl->acts_for.erase(delegate);
  // Revocation also withdraws any declassification the delegate obtained
  // through the edge, so a grant/revoke round trip restores prior verdicts.
  tl->declassified_for.erase(delegate);
  return Verdict::allow();
}

bool Registry::acts_for(TaskId t, TileId id) const {
  const auto* tl = tile(id);
  return tl && tl->acts_for.count(t) != 0;
}

bool Registry::is_authority(TaskId t, TileId id) const {
  const auto* tl = tile(id);
  return tl && (tl->owner == t || tl->acts_for.count(t) != 0);
}

Verdict Registry::add_caps(TaskId t, Tag tag, bool plus, bool minus) {
  auto* te = task(t);
  if (!te) return Verdict::deny(Deny::unknown_task);
  te->caps.add(tag, plus, minus);
  return Verdict::allow();
}

bool Registry::has_plus(TaskId t, Tag tag) const {
  const auto* te = task(t);
  return te && te->caps.has_plus(tag);
}

bool Registry::has_minus(TaskId t, Tag tag) const {
  const auto* te = task(t);
  return te && te->caps.has_minus(tag);
}

Result<Tag> Registry::tile_tag(TileId id) const {
  const auto* tl = tile(id);
  if (!tl) return Result<Tag>::failure(Deny::unknown_id);
  return Result<Tag>::success(tl->tag);
}

Result<TaskId> Registry::tile_owner(TileId id) const {
  const auto* tl = tile(id);
  if (!tl) return Result<TaskId>::failure(Deny::unknown_id);
  return Result<TaskId>::success(tl->owner);
}

Result<Perms> Registry::tile_perms(TileId id) const {
  const auto* tl = tile(id);
  if (!tl) return Result<Perms>::failure(Deny::unknown_id);
  return Result<Perms>::success(tl->perms);
}

Verdict Registry::set_tile_perms(TileId id, Perms p) {
  auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);
  tl->perms = p;
  return Verdict::allow();
}

bool Registry::tile_locked(TileId id) const {
  const auto* tl = tile(id);
  return tl && tl->locked;
}

TaskId Registry::tile_lock_holder(TileId id) const {
  const auto* tl = tile(id);
  return tl ? tl->lock_holder : kNoTask;
}

Verdict Registry::lock_tile(TileId id, TaskId locker) {
  auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);
  if (tl->locked) return Verdict::deny(Deny::locked);  // lock does not nest
  auto shadow = mint_unowned_tag();
  if (!shadow.ok()) return Verdict::deny(shadow.reason);
  tl->locked = true;
  tl->lock_holder = locker;
  tl->lock_tag = *shadow;
  return Verdict::allow();
}

Verdict Registry::unlock_tile(TileId id) {
  auto* tl = tile(id);
  if (!tl) return Verdict::deny(Deny::unknown_id);
  if (!tl->locked) return Verdict::deny(Deny::not_locked);
  tl->locked = false;
  tl->lock_holder = kNoTask;
  tl->lock_tag = Tag{};
  return Verdict::allow();
}

bool Registry::declassified_for(TileId id, TaskId t) const {
  const auto* tl = tile(id);
  return tl && tl->declassified_for.count(t) != 0;
}

const Registry::TaskEntry* Registry::find_task(TaskId t) const { return task(t); }
const Registry::TileEntry* Registry::find_tile(TileId id) const { return tile(id); }

Registry::TaskEntry* Registry::task(TaskId t) {
  auto it = tasks_.find(t);
  return it == tasks_.end() ? nullptr : &it->second;
}

Registry::TileEntry* Registry::tile(TileId id) {
  auto it = tiles_.find(id);
  return it == tiles_.end() ? nullptr : &it->second;
}

const Registry::TaskEntry* Registry::task(TaskId t) const {
  auto it = tasks_.find(t);
  return it == tasks_.end() ? nullptr : &it->second;
}

const Registry::TileEntry* Registry::tile(TileId id) const {
  auto it = tiles_.find(id);
  return it == tiles_.end() ? nullptr : &it->second;
}

}  // namespace utiles::acl
