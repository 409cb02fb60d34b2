#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "utiles/engine.hpp"
#include "utiles/scenario.hpp"

namespace utiles::harness {

// Counter-based benchmark: structural cost model only. Wall-clock time is
// never part of the output contract.
struct BenchConfig {
  enum class Pattern : std::uint8_t { lru, roundrobin, random };

  std::uint32_t tiles = 16;
  std::uint32_t ops = 1000;
  Pattern pattern = Pattern::roundrobin;
  std::uint64_t seed = 1;
  bool unbounded_cache = false;  // --cache inf
};

std::optional<BenchConfig::Pattern> pattern_from_string(std::string_view s);
const char* to_string(BenchConfig::Pattern p);

struct BenchResult {
  std::string csv;  // header + setup/run/total rows
  mmu::CostCounters run;  // run-phase deltas
  cache::Stats cache_run;
  // Eviction work during the run phase: state saves plus restores.
  std::uint64_t save_restore_ops = 0;
  double save_restore_per_op = 0.0;
};

BenchResult run_bench(const BenchConfig& cfg);

// Synthetic stand-ins for the case studies: a key store protecting
// session keys behind locked tiles (single tile vs tile per session) and
// a key-value store with one private tile per worker thread.
struct KeystoreResult {
  std::string csv;  // rows: single_tile, tile_per_session
  cache::Stats single;
  cache::Stats per_session;
  std::uint64_t faults = 0;
};

KeystoreResult workload_keystore(std::uint32_t sessions);

struct KvstoreResult {
  std::string csv;  // row: run
  cache::Stats stats;
  std::uint64_t faults = 0;
  std::uint32_t tiles = 0;
};

KvstoreResult workload_kvstore(std::uint32_t threads);

}  // namespace utiles::harness
