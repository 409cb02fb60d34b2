#include "utiles/mmu.hpp"

namespace utiles::mmu {

const char* to_string(DomainMode m) {
  switch (m) {
    case DomainMode::no_access: return "no-access";
    case DomainMode::client: return "client";
    case DomainMode::reserved: return "reserved";
    case DomainMode::manager: return "manager";
  }
  return "?";
}

const char* to_string(AccessOutcome::Kind k) {
  switch (k) {
    case AccessOutcome::Kind::ok: return "ok";
    case AccessOutcome::Kind::domain_fault: return "domain-fault";
    case AccessOutcome::Kind::permission_fault: return "permission-fault";
    case AccessOutcome::Kind::translation_fault: return "translation-fault";
  }
  return "?";
}

Dacr::Dacr(std::uint32_t domains) : fields_(domains, static_cast<std::uint8_t>(DomainMode::no_access)) {}

DomainMode Dacr::mode(DomainId d) const {
  if (d >= fields_.size()) throw MmuError("dacr: domain out of range");
  return static_cast<DomainMode>(fields_[d]);
}

void Dacr::set(DomainId d, DomainMode m) {
  if (d >= fields_.size()) throw MmuError("dacr: domain out of range");
  if (m == DomainMode::reserved) throw MmuError("dacr: reserved mode (0b10) is never written");
  fields_[d] = static_cast<std::uint8_t>(m);
}

std::uint32_t Dacr::raw() const {
  std::uint32_t r = 0;
  std::uint32_t n = domain_count() < kHardwareDomains ? domain_count() : kHardwareDomains;
  for (std::uint32_t d = 0; d < n; ++d) {
    r |= static_cast<std::uint32_t>(fields_[d]) << (2 * d);
  }
  return r;
}

void Dacr::ensure_domains(std::uint32_t n) {
  if (n > fields_.size()) fields_.resize(n, static_cast<std::uint8_t>(DomainMode::no_access));
}

AccessOutcome::Kind decide(DomainMode mode, Perms ap, AccessKind kind) {
  switch (mode) {
    case DomainMode::no_access:
      return AccessOutcome::Kind::domain_fault;
    case DomainMode::manager:
      return AccessOutcome::Kind::ok;
    case DomainMode::client:
      return perm_allows(ap, kind) ? AccessOutcome::Kind::ok
                                   : AccessOutcome::Kind::permission_fault;
    case DomainMode::reserved:
      // Unreachable via set(); fault rather than model unknown behaviour.
      return AccessOutcome::Kind::domain_fault;
  }
  return AccessOutcome::Kind::domain_fault;
}

AddressSpace::AddressSpace(std::uint32_t domains) : dacr_(domains) {}

void AddressSpace::map_section(std::uint32_t vbase, std::uint32_t pbase, DomainId d, Perms ap) {
  if (!section_aligned(vbase) || !section_aligned(pbase)) {
    throw MmuError("map_section: base not 1MB aligned");
  }
  if (!ap_installable(ap)) throw MmuError("map_section: ap not expressible in page tables");
  if (d >= dacr_.domain_count()) throw MmuError("map_section: domain out of range");
  std::uint32_t idx = section_index(vbase);
  if (entries_.count(idx)) throw MmuError("map_section: section already mapped");
  entries_[idx] = FirstLevelEntry{vbase, pbase, d, ap, true};
}

void AddressSpace::unmap_section(std::uint32_t vbase) {
  if (!section_aligned(vbase)) throw MmuError("unmap_section: base not 1MB aligned");
  auto it = entries_.find(section_index(vbase));
  if (it == entries_.end()) throw MmuError("unmap_section: section not mapped");
  entries_.erase(it);
  counters_.tlb_flushes += 1;
}

void AddressSpace::set_section_ap(std::uint32_t vbase, Perms ap) {
  if (!ap_installable(ap)) throw MmuError("set_section_ap: ap not expressible in page tables");
  auto it = entries_.find(section_index(vbase));
  if (it == entries_.end()) throw MmuError("set_section_ap: section not mapped");
  it->second.ap = ap;
  counters_.tlb_flushes += 1;
}

void AddressSpace::set_domain_access(DomainId d, DomainMode m) {
  dacr_.set(d, m);
  counters_.dacr_writes += 1;
}

bool AddressSpace::write_dacr(const Dacr& view) {
  if (view == dacr_) return false;
  dacr_ = view;
  counters_.dacr_writes += 1;
  return true;
}

AccessOutcome AddressSpace::access(std::uint32_t vaddr, AccessKind kind) {
  counters_.table_walks += 1;
  auto it = entries_.find(section_index(vaddr));
  if (it == entries_.end() || !it->second.valid) {
    return AccessOutcome{AccessOutcome::Kind::translation_fault, 0};
  }
  const FirstLevelEntry& e = it->second;
  AccessOutcome::Kind k = decide(dacr_.mode(e.domain), e.ap, kind);
  switch (k) {
    case AccessOutcome::Kind::domain_fault:
      counters_.domain_faults += 1;
      return AccessOutcome{k, 0};
    case AccessOutcome::Kind::permission_fault:
      counters_.perm_faults += 1;
      return AccessOutcome{k, 0};
    default:
      return AccessOutcome{AccessOutcome::Kind::ok, e.pbase + (vaddr - e.vbase)};
  }
}

const FirstLevelEntry* AddressSpace::find_section(std::uint32_t vaddr) const {
  auto it = entries_.find(section_index(vaddr));
  return it == entries_.end() ? nullptr : &it->second;
}

}  // namespace utiles::mmu
