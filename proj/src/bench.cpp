#include "utiles/bench.hpp"

#include <random>
#include <stdexcept>
#include <vector>

namespace utiles::harness {

namespace {

mmu::CostCounters delta(const mmu::CostCounters& now, const mmu::CostCounters& then) {
  mmu::CostCounters d;
  d.dacr_writes = now.dacr_writes - then.dacr_writes;
  d.tlb_flushes = now.tlb_flushes - then.tlb_flushes;
  d.table_walks = now.table_walks - then.table_walks;
  d.domain_faults = now.domain_faults - then.domain_faults;
  d.perm_faults = now.perm_faults - then.perm_faults;
  return d;
}

cache::Stats delta(const cache::Stats& now, const cache::Stats& then) {
  cache::Stats d;
  d.hits = now.hits - then.hits;
  d.misses = now.misses - then.misses;
  d.evictions = now.evictions - then.evictions;
  d.restores = now.restores - then.restores;
  return d;
}

EngineConfig harness_engine(bool unbounded) {
  EngineConfig cfg;
  cfg.reserved_domains = 0;  // all 16 hardware domains cacheable
  cfg.unbounded_cache = unbounded;
  return cfg;
}

std::uint32_t tile_base(std::uint32_t i) { return (i + 1) << mmu::kSectionShift; }

void check(bool ok, const char* what) {
  if (!ok) throw std::runtime_error(std::string("bench: engine call failed: ") + what);
}

}  // namespace

std::optional<BenchConfig::Pattern> pattern_from_string(std::string_view s) {
  if (s == "lru") return BenchConfig::Pattern::lru;
  if (s == "roundrobin") return BenchConfig::Pattern::roundrobin;
  if (s == "random") return BenchConfig::Pattern::random;
  return std::nullopt;
}

const char* to_string(BenchConfig::Pattern p) {
  switch (p) {
    case BenchConfig::Pattern::lru: return "lru";
    case BenchConfig::Pattern::roundrobin: return "roundrobin";
    case BenchConfig::Pattern::random: return "random";
  }
  return "?";
}

BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.tiles < 1 || cfg.ops < 1) throw std::invalid_argument("bench: counts must be >= 1");
  if (cfg.tiles > 2048) throw std::invalid_argument("bench: too many tiles for the address map");

  Engine e(harness_engine(cfg.unbounded_cache));
  TaskId root = e.spawn_root_task();

  std::vector<TileId> ids;
  for (std::uint32_t i = 0; i < cfg.tiles; ++i) {
    auto r = e.utile_create(root);
    check(r.ok(), "utile_create");
    ids.push_back(*r);
  }
  mmu::CostCounters c_setup = e.counters();
  cache::Stats s_setup = e.cache_stats();

  // Run phase: each op is one mmap/munmap cycle against the chosen tile.
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::uint64_t> last_use(cfg.tiles, 0);
  for (std::uint32_t op = 0; op < cfg.ops; ++op) {
    std::uint32_t t = 0;
    switch (cfg.pattern) {
      case BenchConfig::Pattern::roundrobin:
        t = op % cfg.tiles;
        break;
      case BenchConfig::Pattern::random:
        t = static_cast<std::uint32_t>(rng() % cfg.tiles);
        break;
      case BenchConfig::Pattern::lru: {
        // Adversarial pattern: always touch the least recently used tile.
        for (std::uint32_t i = 1; i < cfg.tiles; ++i) {
          if (last_use[i] < last_use[t]) t = i;
        }
        break;
      }
    }
    last_use[t] = op + 1;
    auto m = e.utile_mmap(root, ids[t], tile_base(t), mmu::kSectionBytes, Perms::rw);
    check(m.ok(), "utile_mmap");
    check(e.utile_munmap(root, ids[t], tile_base(t), mmu::kSectionBytes).ok(), "utile_munmap");
  }

  mmu::CostCounters c_total = e.counters();
  cache::Stats s_total = e.cache_stats();
  mmu::CostCounters c_run = delta(c_total, c_setup);
  cache::Stats s_run = delta(s_total, s_setup);

  BenchResult res;
  res.run = c_run;
  res.cache_run = s_run;
  res.save_restore_ops = s_run.evictions + s_run.restores;
  res.save_restore_per_op = static_cast<double>(res.save_restore_ops) / cfg.ops;
  res.csv = std::string(kCsvHeader) + "\n" + csv_row("setup", c_setup, s_setup) + "\n" +
            csv_row("run", c_run, s_run) + "\n" + csv_row("total", c_total, s_total) + "\n";
  return res;
}

KeystoreResult workload_keystore(std::uint32_t sessions) {
  if (sessions < 1 || sessions > 2048) throw std::invalid_argument("keystore: bad session count");
  const std::uint32_t requests = 8 * sessions;
  KeystoreResult out;

  // Variant 1: every session key inside one locked tile.
  {
    Engine e(harness_engine(false));
    TaskId root = e.spawn_root_task();
    auto tile = e.utile_create(root);
    check(tile.ok(), "utile_create");
    check(e.utile_mmap(root, *tile, 0x40000000u, mmu::kSectionBytes, Perms::rw).ok(),
          "utile_mmap");
    std::vector<std::uint32_t> keys;
    for (std::uint32_t s = 0; s < sessions; ++s) {
      auto key = e.utile_malloc(root, *tile, 32);
      check(key.ok(), "utile_malloc");
      keys.push_back(*key);
      check(e.mediated_write(root, *key, static_cast<std::uint8_t>(s * 7 + 1)).ok(),
            "write key");
    }
    check(e.utile_lock(root, {*tile}).ok(), "utile_lock");
    for (std::uint32_t r = 0; r < requests; ++r) {
      std::uint32_t s = r % sessions;
      check(e.utile_unlock(root, {*tile}).ok(), "utile_unlock");
      auto rd = e.mediated_read(root, keys[s]);
      check(rd.ok() && rd.data == static_cast<std::uint8_t>(s * 7 + 1), "read key");
      check(e.utile_lock(root, {*tile}).ok(), "utile_lock");
    }
    out.single = e.cache_stats();
    out.faults += e.fault_log().size();
    out.csv = std::string(kCsvHeader) + "\n" + csv_row("single_tile", e.counters(), out.single) +
              "\n";
  }

  // Variant 2: one tile per session key.
  {
    Engine e(harness_engine(false));
    TaskId root = e.spawn_root_task();
    std::vector<TileId> tiles;
    std::vector<std::uint32_t> keys;
    for (std::uint32_t s = 0; s < sessions; ++s) {
      auto tile = e.utile_create(root);
      check(tile.ok(), "utile_create");
      check(e.utile_mmap(root, *tile, tile_base(s), mmu::kSectionBytes, Perms::rw).ok(),
            "utile_mmap");
      auto key = e.utile_malloc(root, *tile, 32);
      check(key.ok(), "utile_malloc");
      check(e.mediated_write(root, *key, static_cast<std::uint8_t>(s * 7 + 1)).ok(),
            "write key");
      check(e.utile_lock(root, {*tile}).ok(), "utile_lock");
      tiles.push_back(*tile);
      keys.push_back(*key);
    }
    for (std::uint32_t r = 0; r < requests; ++r) {
      std::uint32_t s = r % sessions;
      check(e.utile_unlock(root, {tiles[s]}).ok(), "utile_unlock");
      auto rd = e.mediated_read(root, keys[s]);
      check(rd.ok() && rd.data == static_cast<std::uint8_t>(s * 7 + 1), "read key");
      check(e.utile_lock(root, {tiles[s]}).ok(), "utile_lock");
    }
    out.per_session = e.cache_stats();
    out.faults += e.fault_log().size();
    out.csv += csv_row("tile_per_session", e.counters(), out.per_session) + "\n";
  }
  return out;
}

KvstoreResult workload_kvstore(std::uint32_t threads) {
  if (threads < 1 || threads > 1024) throw std::invalid_argument("kvstore: bad thread count");
  Engine e(harness_engine(false));
  TaskId root = e.spawn_root_task();

  KvstoreResult out;
  constexpr std::uint32_t kRecords = 4;
  for (std::uint32_t i = 0; i < threads; ++i) {
    // Each worker gets an empty credential set and builds its own private
    // store; nothing it owns is reachable from its siblings.
    auto worker = e.utile_clone(root, {});
    check(worker.ok(), "utile_clone");
    auto tile = e.utile_create(*worker);
    check(tile.ok(), "utile_create");
    check(e.utile_mmap(*worker, *tile, tile_base(i), mmu::kSectionBytes, Perms::rw).ok(),
          "utile_mmap");
    for (std::uint32_t rec = 0; rec < kRecords; ++rec) {
      auto blk = e.utile_malloc(*worker, *tile, 100);
      check(blk.ok(), "utile_malloc");
      std::uint8_t v = static_cast<std::uint8_t>(i * 31 + rec);
      check(e.mediated_write(*worker, *blk, v).ok(), "write record");
      auto rd = e.mediated_read(*worker, *blk);
      check(rd.ok() && rd.data == v, "read record");
    }
    check(e.task_exit(*worker).ok(), "task_exit");
    check(e.utile_join(root, *worker).ok(), "utile_join");
    out.tiles += 1;
  }
  out.stats = e.cache_stats();
  out.faults = e.fault_log().size();
  out.csv = std::string(kCsvHeader) + "\n" + csv_row("run", e.counters(), out.stats) + "\n";
  return out;
}

}  // namespace utiles::harness
