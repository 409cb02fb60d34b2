#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace utiles {

// Principal and resource identifiers. Tile ids start well above the
// domain-id range so a tile id can never be mistaken for (or leak) a
// physical domain number.
using TaskId = std::uint32_t;
using TileId = std::uint32_t;
using DomainId = std::uint32_t;

inline constexpr TaskId kNoTask = 0;
inline constexpr TileId kFirstTileId = 100;

// Permission modes. Encoded as r/w/x bits; wx (6) is not a nameable mode.
enum class Perms : std::uint8_t {
  none = 0,
  ro = 1,
  wo = 2,
  rw = 3,
  xo = 4,
  rx = 5,
  rwx = 7,
};

enum class AccessKind : std::uint8_t { read, write, exec, layout_change };

constexpr std::uint8_t perm_bit(AccessKind k) {
  switch (k) {
    case AccessKind::read: return 1;
    case AccessKind::write: return 2;
    case AccessKind::exec: return 4;
    case AccessKind::layout_change: return 0;
  }
  return 0;
}

constexpr bool perm_allows(Perms p, AccessKind k) {
  return (static_cast<std::uint8_t>(p) & perm_bit(k)) != 0;
}

const char* to_string(Perms p);
std::optional<Perms> perms_from_string(std::string_view s);

// Reason codes carried by deny verdicts. The first four are the policy
// reasons surfaced to scenarios; the rest are argument/state errors.
enum class Deny : std::uint8_t {
  none = 0,
  no_plus_cap,
  locked,
  perm_mismatch,
  no_authority,
  policy,
  unknown_id,
  unknown_task,
  not_owner,
  not_locked,
  overlap,
  double_map,
  not_mapped,
  misaligned,
  bad_range,
  zero_len,
  oom,
  double_free,
  foreign_addr,
  no_heap,
  minus_not_allowed,
  not_child,
  still_running,
  already_joined,
  tag_exhausted,
  terminated,
};

const char* to_string(Deny d);
std::optional<Deny> deny_from_string(std::string_view s);

struct Verdict {
  Deny reason = Deny::none;

  constexpr bool ok() const { return reason == Deny::none; }
  static constexpr Verdict allow() { return Verdict{}; }
  static constexpr Verdict deny(Deny r) { return Verdict{r}; }
};

// Minimal value-or-deny result. Engine APIs return verdicts, never
// exceptions, so the scenario runner can assert on reason codes.
template <typename T>
struct Result {
  std::optional<T> val;
  Deny reason = Deny::none;

  bool ok() const { return val.has_value(); }
  const T& operator*() const { return *val; }
  const T* operator->() const { return &*val; }
  static Result success(T v) { return Result{std::move(v), Deny::none}; }
  static Result failure(Deny r) { return Result{std::nullopt, r}; }
};

enum class FaultKind : std::uint8_t { domain, permission, translation, policy };

const char* to_string(FaultKind k);
std::optional<FaultKind> fault_kind_from_string(std::string_view s);

}  // namespace utiles
