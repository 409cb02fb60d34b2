#include "utiles/types.hpp"

namespace utiles {

const char* to_string(Perms p) {
  switch (p) {
    case Perms::none: return "none";
    case Perms::ro: return "ro";
    case Perms::wo: return "wo";
    case Perms::rw: return "rw";
    case Perms::xo: return "xo";
    case Perms::rx: return "rx";
    case Perms::rwx: return "rwx";
  }
  return "?";
}

std::optional<Perms> perms_from_string(std::string_view s) {
  if (s == "none") return Perms::none;
  if (s == "ro") return Perms::ro;
  if (s == "wo") return Perms::wo;
  if (s == "rw") return Perms::rw;
  if (s == "xo") return Perms::xo;
  if (s == "rx") return Perms::rx;
  if (s == "rwx") return Perms::rwx;
  return std::nullopt;
}

const char* to_string(Deny d) {
  switch (d) {
    case Deny::none: return "allow";
    case Deny::no_plus_cap: return "no-plus-cap";
    case Deny::locked: return "locked";
    case Deny::perm_mismatch: return "perm-mismatch";
    case Deny::no_authority: return "no-authority";
    case Deny::policy: return "policy";
    case Deny::unknown_id: return "unknown-id";
    case Deny::unknown_task: return "unknown-task";
    case Deny::not_owner: return "not-owner";
    case Deny::not_locked: return "not-locked";
    case Deny::overlap: return "overlap";
    case Deny::double_map: return "double-map";
    case Deny::not_mapped: return "not-mapped";
    case Deny::misaligned: return "misaligned";
    case Deny::bad_range: return "bad-range";
    case Deny::zero_len: return "zero-len";
    case Deny::oom: return "oom";
    case Deny::double_free: return "double-free";
    case Deny::foreign_addr: return "foreign-addr";
    case Deny::no_heap: return "no-heap";
    case Deny::minus_not_allowed: return "minus-not-allowed";
    case Deny::not_child: return "not-child";
    case Deny::still_running: return "still-running";
    case Deny::already_joined: return "already-joined";
    case Deny::tag_exhausted: return "tag-exhausted";
    case Deny::terminated: return "terminated";
  }
  return "?";
}

std::optional<Deny> deny_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Deny::terminated); ++i) {
    Deny d = static_cast<Deny>(i);
    if (s == to_string(d)) return d;
  }
  return std::nullopt;
}

const char* to_string(FaultKind k) {
  switch (k) {
    case FaultKind::domain: return "domain";
    case FaultKind::permission: return "permission";
    case FaultKind::translation: return "translation";
    case FaultKind::policy: return "policy";
  }
  return "?";
}

std::optional<FaultKind> fault_kind_from_string(std::string_view s) {
  if (s == "domain") return FaultKind::domain;
  if (s == "permission") return FaultKind::permission;
  if (s == "translation") return FaultKind::translation;
  if (s == "policy") return FaultKind::policy;
  return std::nullopt;
}

}  // namespace utiles
