#include "utiles/engine.hpp"

namespace utiles {

TaskId Engine::spawn_root_task() {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  TaskId id = next_task_++;
  registry_.register_task(id);
  tasks_.emplace(id, TaskState{});
  return id;
}

Result<TaskId> Engine::spawn_child(TaskId parent) {
  TaskId id = next_task_++;
  registry_.register_task(id);
  TaskState ts;
  ts.parent = parent;
  tasks_.emplace(id, ts);
  tasks_.at(parent).children.insert(id);
  return Result<TaskId>::success(id);
}

Result<TaskId> Engine::utile_clone(TaskId parent, const UInfo& uinfo) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(parent); !v.ok()) return Result<TaskId>::failure(v.reason);

  // Validate the whole capability list first: the call is atomic.
  for (const UInfoEntry& e : uinfo) {
    auto tag = registry_.tile_tag(e.tile);
    if (!tag.ok()) return Result<TaskId>::failure(Deny::unknown_id);
    if (!registry_.has_plus(parent, *tag)) return Result<TaskId>::failure(Deny::no_plus_cap);
    if (e.minus && !registry_.is_authority(parent, e.tile)) {
      return Result<TaskId>::failure(Deny::no_authority);
    }
  }

  // The child inherits nothing; it receives exactly the listed capabilities.
  auto child = spawn_child(parent);
  for (const UInfoEntry& e : uinfo) {
    auto tag = registry_.tile_tag(e.tile);
    registry_.add_caps(*child, *tag, e.plus, e.minus);
  }
  return child;
}

Result<TaskId> Engine::posix_fork(TaskId parent) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(parent); !v.ok()) return Result<TaskId>::failure(v.reason);
  // Fork guard: labels and capability lists are never copied to the child.
  return spawn_child(parent);
}

Result<JoinStatus> Engine::utile_join(TaskId caller, TaskId child) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(caller); !v.ok()) return Result<JoinStatus>::failure(v.reason);
  auto it = tasks_.find(child);
  if (it == tasks_.end() || it->second.parent != caller) {
    return Result<JoinStatus>::failure(Deny::not_child);
  }
  switch (it->second.state) {
    case TaskRunState::runnable:
      return Result<JoinStatus>::failure(Deny::still_running);
    case TaskRunState::joined:
      return Result<JoinStatus>::failure(Deny::already_joined);
    case TaskRunState::finished: {
      it->second.state = TaskRunState::joined;
      return Result<JoinStatus>::success(JoinStatus{false, std::nullopt});
    }
    case TaskRunState::terminated: {
      JoinStatus s{true, it->second.fault_index};
      it->second.state = TaskRunState::joined;
      return Result<JoinStatus>::success(s);
    }
  }
  return Result<JoinStatus>::failure(Deny::unknown_task);
}

Verdict Engine::task_exit(TaskId task) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  tasks_.at(task).state = TaskRunState::finished;
  return Verdict::allow();
}

Verdict Engine::utile_transfer_caps(TaskId giver, const UInfo& uinfo, TaskId to) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(giver); !v.ok()) return v;
  if (!tasks_.count(to)) return Verdict::deny(Deny::unknown_task);

  for (const UInfoEntry& e : uinfo) {
    if (e.minus) return Verdict::deny(Deny::minus_not_allowed);  // plus-only channel
    auto tag = registry_.tile_tag(e.tile);
    if (!tag.ok()) return Verdict::deny(Deny::unknown_id);
    if (!registry_.has_plus(giver, *tag)) return Verdict::deny(Deny::no_plus_cap);
  }
  for (const UInfoEntry& e : uinfo) {
    auto tag = registry_.tile_tag(e.tile);
    registry_.add_caps(to, *tag, /*plus=*/true, /*minus=*/false);  // copy, not move
  }
  return Verdict::allow();
}

Verdict Engine::utile_lock(TaskId task, const std::vector<TileId>& tiles) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  for (TileId id : tiles) {
    auto tag = registry_.tile_tag(id);
    if (!tag.ok()) return Verdict::deny(Deny::unknown_id);
    if (!registry_.has_plus(task, *tag)) return Verdict::deny(Deny::no_plus_cap);
    if (registry_.tile_locked(id)) return Verdict::deny(Deny::locked);
  }
  for (TileId id : tiles) registry_.lock_tile(id, task);
  return Verdict::allow();
}

Verdict Engine::utile_unlock(TaskId task, const std::vector<TileId>& tiles) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  for (TileId id : tiles) {
    if (!registry_.tile_known(id)) return Verdict::deny(Deny::unknown_id);
    if (!registry_.tile_locked(id)) return Verdict::deny(Deny::not_locked);
    auto owner = registry_.tile_owner(id);
    if (registry_.tile_lock_holder(id) != task && (!owner.ok() || *owner != task)) {
      return Verdict::deny(Deny::no_authority);
    }
  }
  for (TileId id : tiles) registry_.unlock_tile(id);
  return Verdict::allow();
}

Verdict Engine::utile_declassify(TaskId task, const std::vector<TileId>& tiles) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  for (TileId id : tiles) {
    auto tag = registry_.tile_tag(id);
    if (!tag.ok()) return Verdict::deny(Deny::unknown_id);
    if (!registry_.has_minus(task, *tag) && !registry_.acts_for(task, id)) {
      return Verdict::deny(Deny::no_authority);
    }
  }
  for (TileId id : tiles) registry_.declassify(task, id);
  return Verdict::allow();
}

Verdict Engine::utile_grant(TaskId task, const std::vector<TileId>& tiles, TaskId delegate) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  if (!tasks_.count(delegate)) return Verdict::deny(Deny::unknown_task);
  for (TileId id : tiles) {
    if (!registry_.tile_known(id)) return Verdict::deny(Deny::unknown_id);
    if (!registry_.is_authority(task, id)) return Verdict::deny(Deny::no_authority);
  }
  for (TileId id : tiles) registry_.grant(task, delegate, id);
  return Verdict::allow();
}

Verdict Engine::utile_revoke_grant(TaskId task, const std::vector<TileId>& tiles,
                                   TaskId delegate) {
  std::lock_guard<std::mutex> g(mu_);
  op_counter_ += 1;
  if (auto v = caller_ok(task); !v.ok()) return v;
  if (!tasks_.count(delegate)) return Verdict::deny(Deny::unknown_task);
  for (TileId id : tiles) {
    if (!registry_.tile_known(id)) return Verdict::deny(Deny::unknown_id);
    if (!registry_.is_authority(task, id)) return Verdict::deny(Deny::no_authority);
  }
  for (TileId id : tiles) registry_.revoke_grant(task, delegate, id);
  return Verdict::allow();
}

}  // namespace utiles
