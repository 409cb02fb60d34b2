#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "utiles/types.hpp"

namespace utiles::mmu {

// ARMv7-style memory-domain checking over 1MB first-level sections.
// The hardware configuration is 16 domains behind a 32-bit DACR; larger
// domain counts exist only so the unbounded-virtualization test mode can
// run the same code path without eviction.

inline constexpr std::uint32_t kSectionShift = 20;
inline constexpr std::uint32_t kSectionBytes = 1u << kSectionShift;
inline constexpr std::uint32_t kHardwareDomains = 16;

constexpr std::uint32_t section_index(std::uint32_t addr) { return addr >> kSectionShift; }
constexpr std::uint32_t section_base(std::uint32_t addr) { return addr & ~(kSectionBytes - 1); }
constexpr bool section_aligned(std::uint32_t addr) { return (addr & (kSectionBytes - 1)) == 0; }
constexpr std::uint64_t section_round_up(std::uint64_t addr) {
  return (addr + kSectionBytes - 1) & ~static_cast<std::uint64_t>(kSectionBytes - 1);
}

enum class DomainMode : std::uint8_t {
  no_access = 0b00,  // any access faults, permission bits ignored
  client = 0b01,     // access checked against the section's ap bits
  reserved = 0b10,   // never written; unknown behaviour on real hardware
  manager = 0b11,    // full access, no permission check
};

const char* to_string(DomainMode m);

struct MmuError : std::logic_error {
  using std::logic_error::logic_error;
};

// Domain access control register: a 2-bit mode field per domain.
// raw() is the 32-bit register image for the 16-domain hardware form.
class Dacr {
 public:
  explicit Dacr(std::uint32_t domains = kHardwareDomains);

  DomainMode mode(DomainId d) const;
  void set(DomainId d, DomainMode m);  // MmuError on reserved or out-of-range
  std::uint32_t raw() const;
  std::uint32_t domain_count() const { return static_cast<std::uint32_t>(fields_.size()); }
  void ensure_domains(std::uint32_t n);

  bool operator==(const Dacr&) const = default;

 private:
  std::vector<std::uint8_t> fields_;
};

struct FirstLevelEntry {
  std::uint32_t vbase = 0;
  std::uint32_t pbase = 0;
  DomainId domain = 0;
  Perms ap = Perms::none;
  bool valid = false;
};

struct AccessOutcome {
  enum class Kind : std::uint8_t { ok, domain_fault, permission_fault, translation_fault };
  Kind kind = Kind::translation_fault;
  std::uint32_t paddr = 0;

  bool ok() const { return kind == Kind::ok; }
};

const char* to_string(AccessOutcome::Kind k);

// Hardware ap bits cannot express write-only or exec-only; those modes
// reach the page tables only via the vm layer's emulation path.
constexpr bool ap_installable(Perms ap) { return ap != Perms::wo && ap != Perms::xo; }

// The pure domain/ap/kind decision, independent of any mapping state.
AccessOutcome::Kind decide(DomainMode mode, Perms ap, AccessKind kind);

struct CostCounters {
  std::uint64_t dacr_writes = 0;
  std::uint64_t tlb_flushes = 0;
  std::uint64_t table_walks = 0;
  std::uint64_t domain_faults = 0;
  std::uint64_t perm_faults = 0;
};

class AddressSpace {
 public:
  explicit AddressSpace(std::uint32_t domains = kHardwareDomains);

  // Section management. Contract violations (misalignment, double map,
  // unmapping an absent section, uninstallable ap) throw MmuError: the vm
  // layer validates before calling, so a throw here is an engine bug.
  void map_section(std::uint32_t vbase, std::uint32_t pbase, DomainId d, Perms ap);
  void unmap_section(std::uint32_t vbase);        // +1 tlb flush
  void set_section_ap(std::uint32_t vbase, Perms ap);  // +1 tlb flush

  // DACR updates are cheap and never flush the TLB.
  void set_domain_access(DomainId d, DomainMode m);  // +1 dacr write
  bool write_dacr(const Dacr& view);  // whole-register swap; +1 dacr write iff changed

  AccessOutcome access(std::uint32_t vaddr, AccessKind kind);

  const FirstLevelEntry* find_section(std::uint32_t vaddr) const;

  Dacr& dacr() { return dacr_; }
  const Dacr& dacr() const { return dacr_; }
  CostCounters& counters() { return counters_; }
  const CostCounters& counters() const { return counters_; }

  // Exposed for simulation internals and direct test injection.
  std::map<std::uint32_t, FirstLevelEntry>& entries() { return entries_; }
  const std::map<std::uint32_t, FirstLevelEntry>& entries() const { return entries_; }

 private:
  std::map<std::uint32_t, FirstLevelEntry> entries_;  // by section index
  Dacr dacr_;
  CostCounters counters_;
};

}  // namespace utiles::mmu
