// Acceptance suite: runs every structural criterion at its stated
// tolerance and prints one pass/fail line per criterion. Exit code 0 iff
// all criteria hold.

#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "utiles/access_control.hpp"
#include "utiles/bench.hpp"
#include "utiles/domain_cache.hpp"
#include "utiles/engine.hpp"
#include "utiles/scenario.hpp"

using namespace utiles;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool ok, const std::string& detail = "") {
  std::printf("[%s] %2d. %s%s%s\n", ok ? "PASS" : "FAIL", number, name,
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(SCENARIOS_DIR) + "/" + name);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

acl::Label label_from_mask(unsigned mask) {
  acl::Label l;
  for (int i = 0; i < 8; ++i) {
    if ((mask >> i) & 1u) l.insert(acl::Tag{static_cast<std::uint32_t>(i + 1)});
  }
  return l;
}

// --- criterion 1: flow rules vs brute-force set algebra -------------------

void criterion_flow_rules() {
  bool ok = true;
  for (unsigned a = 0; a < 16 && ok; ++a) {
    for (unsigned b = 0; b < 16 && ok; ++b) {
      acl::Label la = label_from_mask(a), lb = label_from_mask(b);
      ok = ok && acl::can_flow_secrecy(la, lb) == oracle::flow_secrecy(a, b);
      ok = ok && acl::can_flow_integrity(la, lb) == oracle::flow_integrity(a, b);
    }
  }
  // every (from, to, capability) combination over the 4-tag universe
  long checked = 0;
  for (unsigned plus = 0; plus < 16 && ok; ++plus) {
    for (unsigned minus = 0; minus < 16 && ok; ++minus) {
      acl::CapabilitySet caps;
      for (int i = 0; i < 4; ++i) {
        bool p = (plus >> i) & 1u, m = (minus >> i) & 1u;
        if (p || m) caps.add(acl::Tag{static_cast<std::uint32_t>(i + 1)}, p, m);
      }
      for (unsigned from = 0; from < 16 && ok; ++from) {
        for (unsigned to = 0; to < 16 && ok; ++to) {
          bool got = acl::can_change_label(caps, label_from_mask(from), label_from_mask(to));
          ok = ok && got == oracle::change_label({plus, minus}, from, to);
          ++checked;
        }
      }
    }
  }
  report(1, "flow-rule oracle equivalence (4-tag exhaustive)", ok,
         std::to_string(checked + 256) + " combinations");
}

// --- criterion 2: MMU decision table ---------------------------------------

void criterion_mmu_table() {
  using namespace utiles::mmu;
  DomainMode modes[] = {DomainMode::no_access, DomainMode::client, DomainMode::manager};
  Perms aps[] = {Perms::none, Perms::ro, Perms::wo, Perms::rw, Perms::xo, Perms::rx, Perms::rwx};
  AccessKind kinds[] = {AccessKind::read, AccessKind::write, AccessKind::exec};
  bool ok = true;
  int cases = 0;
  for (DomainMode m : modes) {
    for (Perms ap : aps) {
      for (AccessKind k : kinds) {
        AddressSpace as;
        as.entries()[1] = FirstLevelEntry{0x00100000, 0x00100000, 3, ap, true};
        as.dacr().set(3, m);
        std::string got = to_string(as.access(0x00100000, k).kind);
        ok = ok && got == oracle::mmu_decide(m, ap, k);
        ++cases;
      }
    }
  }
  report(2, "MMU decision table (3 modes x 7 ap x 3 kinds)", ok && cases == 63,
         std::to_string(cases) + " cases");
}

// --- criterion 3: cache transparency ---------------------------------------

// A deterministic trace of engine calls generated purely from the seed.
// Replaying the same trace at capacity 16 and at unbounded capacity must
// yield identical verdicts and memory contents; only counters may differ.
struct TraceReplay {
  Engine e;
  TaskId root, helper, outsider;
  std::vector<TileId> tiles;
  std::vector<std::uint32_t> blocks;  // live malloc results
  std::vector<std::string> verdicts;
  std::vector<std::uint32_t> touched;

  static constexpr std::uint32_t kTiles = 20;

  explicit TraceReplay(bool unbounded) : e([&] {
    EngineConfig cfg;
    cfg.reserved_domains = 0;
    cfg.unbounded_cache = unbounded;
    return cfg;
  }()) {
    root = e.spawn_root_task();
    for (std::uint32_t i = 0; i < kTiles; ++i) {
      auto id = e.utile_create(root);
      e.utile_mmap(root, *id, base(i), mmu::kSectionBytes, Perms::rw);
      tiles.push_back(*id);
    }
    UInfo share;
    for (std::uint32_t i = 0; i < kTiles / 2; ++i) {
      share.push_back(UInfoEntry{tiles[i], true, false});
    }
    helper = *e.utile_clone(root, share);
    outsider = *e.utile_clone(root, {});
  }

  static std::uint32_t base(std::uint32_t i) { return (i + 1) << mmu::kSectionShift; }

  TaskId actor(std::uint32_t pick) const {
    return pick == 0 ? root : (pick == 1 ? helper : outsider);
  }

  void note(const std::string& s) { verdicts.push_back(s); }

  void step(std::uint32_t op, std::uint32_t who, std::uint32_t t, std::uint32_t off,
            std::uint8_t val) {
    TaskId a = actor(who);
    TileId tile = tiles[t % tiles.size()];
    std::uint32_t vaddr = base(t % tiles.size()) + (off % mmu::kSectionBytes);
    char buf[64];
    switch (op % 10) {
      case 0:
      case 1:
      case 2: {
        auto r = e.mediated_read(a, vaddr);
        std::snprintf(buf, sizeof(buf), "r %u %u -> %s %u", who, vaddr,
                      r.ok() ? "ok" : (r.status == AccessResult::Status::fault ? "fault" : "rej"),
                      r.ok() ? r.data : 0);
        note(buf);
        break;
      }
      case 3:
      case 4:
      case 5: {
        auto r = e.mediated_write(a, vaddr, val);
        if (r.ok()) touched.push_back(vaddr);
        std::snprintf(buf, sizeof(buf), "w %u %u -> %s", who, vaddr,
                      r.ok() ? "ok" : (r.status == AccessResult::Status::fault ? "fault" : "rej"));
        note(buf);
        break;
      }
      case 6: {
        Perms p = val % 2 ? Perms::ro : Perms::rw;
        auto v = e.utile_mprotect(a, tile, p);
        note(std::string("mp ") + std::to_string(who) + " " + to_string(v.reason));
        break;
      }
      case 7: {
        Verdict v = val % 2 ? e.utile_lock(a, {tile}) : e.utile_unlock(a, {tile});
        note(std::string("lk ") + std::to_string(who) + " " + to_string(v.reason));
        break;
      }
      case 8: {
        auto r = e.utile_malloc(a, tile, 16 + (val % 64));
        if (r.ok()) blocks.push_back(*r);
        note(std::string("ma ") + (r.ok() ? std::to_string(*r) : to_string(r.reason)));
        break;
      }
      case 9: {
        if (blocks.empty()) {
          note("fr none");
          break;
        }
        std::uint32_t addr = blocks[val % blocks.size()];
        auto v = e.utile_free(a, tile, addr);
        note(std::string("fr ") + to_string(v.reason));
        break;
      }
    }
    // the supervisor revives faulted actors so the trace keeps probing
    if (e.task_state(a) == TaskRunState::terminated) {
      e.acknowledge_fault(a);
      note("revive");
    }
  }
};

void criterion_cache_transparency() {
  bool ok = true;
  int traces = 0;
  for (std::uint64_t seed = 1; seed <= 1000 && ok; ++seed) {
    std::mt19937_64 rng(seed);
    TraceReplay small(false), big(true);
    for (int i = 0; i < 60 && ok; ++i) {
      std::uint32_t op = static_cast<std::uint32_t>(rng());
      std::uint32_t who = static_cast<std::uint32_t>(rng() % 3);
      std::uint32_t t = static_cast<std::uint32_t>(rng());
      std::uint32_t off = static_cast<std::uint32_t>(rng());
      std::uint8_t val = static_cast<std::uint8_t>(rng());
      small.step(op, who, t, off, val);
      big.step(op, who, t, off, val);
    }
    ok = ok && small.verdicts == big.verdicts;
    // memory contents: every successfully written address plus a sample grid
    if (ok) {
      for (std::uint32_t addr : small.touched) {
        ok = ok && small.e.peek(addr) == big.e.peek(addr);
      }
      for (std::uint32_t i = 0; i < TraceReplay::kTiles; ++i) {
        for (std::uint32_t off = 0; off < mmu::kSectionBytes; off += 4096) {
          std::uint32_t addr = TraceReplay::base(i) + off;
          ok = ok && small.e.peek(addr) == big.e.peek(addr);
        }
      }
    }
    ++traces;
  }
  report(3, "cache transparency: capacity 16 vs unbounded", ok,
         std::to_string(traces) + " randomized traces");
}

// --- criterion 4: LRU fidelity ---------------------------------------------

void criterion_lru_fidelity() {
  bool ok = true;
  long decisions = 0;
  for (std::uint64_t seed = 10; seed < 15 && ok; ++seed) {
    auto c = cache::DomainCache::bounded([] {
      std::vector<DomainId> s;
      for (DomainId d = 0; d < 16; ++d) s.push_back(d);
      return s;
    }());
    oracle::LruOracle ref(16);
    std::vector<TileId> evicted;
    c.set_hooks(nullptr, [&](TileId t, DomainId) { evicted.push_back(t); });

    std::mt19937_64 rng(seed);
    for (int i = 0; i < 10000 && ok; ++i) {
      TileId t = 100 + rng() % 48;
      std::uint32_t op = rng() % 10;
      if (op < 7) {
        evicted.clear();
        auto want = ref.attach(t);
        c.attach(t);
        if (want) {
          ok = ok && evicted.size() == 1 && evicted[0] == *want;
          ++decisions;
        } else {
          ok = ok && evicted.empty();
        }
      } else if (op < 9) {
        ok = ok && c.touch(t) == ref.touch(t);
      } else {
        ok = ok && c.detach(t) == ref.detach(t);
      }
    }
  }
  report(4, "LRU fidelity vs reference oracle (10k-op traces)", ok,
         std::to_string(decisions) + " eviction decisions");
}

// --- criterion 5: cost-model asymmetry --------------------------------------

void criterion_cost_asymmetry() {
  harness::BenchConfig small;
  small.tiles = 16;
  small.ops = 2000;
  harness::BenchConfig big = small;
  big.tiles = 32;
  auto a = harness::run_bench(small);
  auto b = harness::run_bench(big);
  bool ok = a.cache_run.evictions == 0 && b.cache_run.evictions > 0 &&
            b.save_restore_per_op > a.save_restore_per_op;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "work/op %.3f (32 tiles) vs %.3f (16 tiles)",
                b.save_restore_per_op, a.save_restore_per_op);
  report(5, "cost-model asymmetry: oversubscribed mmap pays save/restore", ok, detail);
}

// --- criterion 6: fast-path vs emulated mprotect ----------------------------

void criterion_mprotect_paths() {
  EngineConfig cfg;
  cfg.reserved_domains = 0;
  Engine e(cfg);
  TaskId root = e.spawn_root_task();
  auto id = e.utile_create(root);
  e.utile_mmap(root, *id, 0x00100000, 3 * mmu::kSectionBytes, Perms::rw);

  bool ok = true;
  auto diff = [&](Perms p) {
    auto before = e.counters();
    ok = ok && e.utile_mprotect(root, *id, p).ok();
    auto after = e.counters();
    return std::pair<std::uint64_t, std::uint64_t>(after.dacr_writes - before.dacr_writes,
                                                   after.tlb_flushes - before.tlb_flushes);
  };

  auto none = diff(Perms::none);  // rw -> none: fast
  ok = ok && none.first == 1 && none.second == 0;
  auto back = diff(Perms::rw);  // none -> rw: fast
  ok = ok && back.first == 1 && back.second == 0;
  auto ro = diff(Perms::ro);  // rw -> ro: emulated, 3 sections
  ok = ok && ro.second == 3;
  auto rw2 = diff(Perms::rw);  // ro -> rw: emulated again (ap rewrite)
  ok = ok && rw2.second == 3;
  auto wo = diff(Perms::wo);  // emulated with software check
  ok = ok && wo.second == 3;
  report(6, "mprotect cost: none<->rw fast path, emulated pays per section", ok);
}

// --- criterion 7: attack corpus ---------------------------------------------

void criterion_attack_corpus() {
  struct Pair {
    const char* attack;
    const char* benign;
  };
  Pair pairs[] = {
      {"overread_locked.scn", "overread_locked_benign.scn"},
      {"cross_thread_theft.scn", "cross_thread_theft_benign.scn"},
      {"fork_leak.scn", "fork_leak_benign.scn"},
      {"posix_mprotect.scn", "posix_mprotect_benign.scn"},
      {"cap_escalation.scn", "cap_escalation_benign.scn"},
  };
  bool ok = true;
  std::string detail;
  for (const auto& pr : pairs) {
    auto atk = harness::parse_scenario(slurp(pr.attack), pr.attack);
    auto ben = harness::parse_scenario(slurp(pr.benign), pr.benign);
    if (!atk.ok() || !ben.ok()) {
      ok = false;
      detail = std::string("parse failure in ") + pr.attack;
      break;
    }
    auto ra = harness::run_scenario(*atk.scenario);
    auto rb = harness::run_scenario(*ben.scenario);
    bool attack_held = ra.passed && ra.expectations_total >= 1;
    bool benign_clean = rb.passed && rb.fault_count == 0;
    if (!attack_held || !benign_clean) {
      ok = false;
      detail = std::string(pr.attack) + (attack_held ? " benign twin failed" : " not denied");
      break;
    }
  }
  report(7, "attack corpus denied, benign twins clean (5 pairs)", ok, detail);
}

// --- criterion 8: allocator differential ------------------------------------

void criterion_allocator_differential() {
  heap::TileHeap h(0x00100000, 1u << 20);
  oracle::FirstFitOracle ref(0x00100000, 1u << 20);
  std::mt19937_64 rng(2024);
  std::vector<std::uint32_t> live;
  bool ok = true;
  int steps = 0;
  for (int i = 0; i < 10000 && ok; ++i) {
    bool do_malloc = live.empty() || (rng() % 100) < 60;
    if (do_malloc) {
      std::uint32_t size = 1 + rng() % 8192;
      auto got = h.malloc_block(size);
      auto want = ref.malloc_block(size);
      ok = ok && got.ok() == want.has_value();
      if (ok && got.ok()) {
        ok = ok && *got == *want;
        live.push_back(*got);
      }
    } else {
      std::uint32_t addr = live[rng() % live.size()];
      live.erase(std::find(live.begin(), live.end(), addr));
      ok = ok && h.free_block(addr).ok() && ref.free_block(addr);
    }
    ok = ok && h.free_bytes() + h.allocated_bytes() == (1u << 20);
    ok = ok && h.free_bytes() == ref.free_bytes() && ref.consistent();
    ++steps;
  }
  report(8, "allocator differential vs first-fit oracle (10k ops)", ok,
         std::to_string(steps) + " steps with conservation");
}

// --- criterion 9: listing-1 end to end ---------------------------------------

void criterion_listing1() {
  auto parsed = harness::parse_scenario(slurp("listing1.scn"), "listing1");
  if (!parsed.ok()) {
    report(9, "listing-1 usage example end-to-end", false, "parse failure");
    return;
  }
  auto rep = harness::run_scenario(*parsed.scenario);
  bool ok = rep.passed && rep.expectations_met == 1 && rep.fault_count == 1 &&
            rep.unexpected_failures == 0;
  report(9, "listing-1 usage example end-to-end", ok,
         "locked read faults, unlocked read returns the data");
}

// --- criterion 10: determinism ------------------------------------------------

void criterion_determinism() {
  bool ok = true;

  auto parsed = harness::parse_scenario(slurp("cross_thread_theft.scn"), "theft");
  ok = ok && parsed.ok();
  if (ok) {
    auto a = harness::run_scenario(*parsed.scenario);
    auto b = harness::run_scenario(*parsed.scenario);
    ok = ok && a.text == b.text && a.counters_csv == b.counters_csv;

    harness::RunOptions opt;
    opt.interleave_seed = 7;
    auto c = harness::run_scenario(*parsed.scenario, opt);
    auto d = harness::run_scenario(*parsed.scenario, opt);
    ok = ok && c.text == d.text;
  }

  harness::BenchConfig cfg;
  cfg.tiles = 24;
  cfg.ops = 500;
  cfg.pattern = harness::BenchConfig::Pattern::random;
  cfg.seed = 99;
  ok = ok && harness::run_bench(cfg).csv == harness::run_bench(cfg).csv;

  report(10, "fixed-seed runs are byte-identical", ok);
}

}  // namespace

int main() {
  criterion_flow_rules();
  criterion_mmu_table();
  criterion_cache_transparency();
  criterion_lru_fidelity();
  criterion_cost_asymmetry();
  criterion_mprotect_paths();
  criterion_attack_corpus();
  criterion_allocator_differential();
  criterion_listing1();
  criterion_determinism();

  if (g_failures == 0) {
    std::printf("acceptance: all criteria hold\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  return 1;
}
