#include <doctest.h>

#include "utiles/bench.hpp"

using namespace utiles;
using namespace utiles::harness;

TEST_CASE("sixteen tiles fit the domain cache with zero evictions") {
  BenchConfig cfg;
  cfg.tiles = 16;
  cfg.ops = 512;
  auto res = run_bench(cfg);
  CHECK(res.cache_run.evictions == 0);
  CHECK(res.save_restore_ops == 0);
}

TEST_CASE("oversubscribed round-robin pays save/restore work per mmap") {
  BenchConfig small;
  small.tiles = 16;
  small.ops = 512;
  BenchConfig big = small;
  big.tiles = 32;
  auto a = run_bench(small);
  auto b = run_bench(big);
  CHECK(b.cache_run.evictions > 0);
  CHECK(b.save_restore_per_op > a.save_restore_per_op);
}

TEST_CASE("the unbounded cache removes eviction work entirely") {
  BenchConfig cfg;
  cfg.tiles = 32;
  cfg.ops = 256;
  cfg.unbounded_cache = true;
  auto res = run_bench(cfg);
  CHECK(res.cache_run.evictions == 0);
}

TEST_CASE("bench output is byte-identical across runs for a fixed seed") {
  BenchConfig cfg;
  cfg.tiles = 24;
  cfg.ops = 300;
  cfg.pattern = BenchConfig::Pattern::random;
  cfg.seed = 77;
  CHECK(run_bench(cfg).csv == run_bench(cfg).csv);

  cfg.pattern = BenchConfig::Pattern::lru;
  CHECK(run_bench(cfg).csv == run_bench(cfg).csv);
}

TEST_CASE("the adversarial lru pattern evicts on every touch once oversubscribed") {
  BenchConfig cfg;
  cfg.tiles = 17;
  cfg.ops = 100;
  cfg.pattern = BenchConfig::Pattern::lru;
  auto res = run_bench(cfg);
  // after the first 16 cold misses every op displaces someone
  CHECK(res.cache_run.evictions >= cfg.ops - 16);
}

TEST_CASE("keystore eviction traffic appears only past the domain budget") {
  auto small = workload_keystore(8);
  CHECK(small.per_session.evictions == 0);
  CHECK(small.single.evictions == 0);
  CHECK(small.faults == 0);

  auto big = workload_keystore(32);
  CHECK(big.per_session.evictions > 0);
  CHECK(big.single.evictions == 0);
  CHECK(big.faults == 0);
  CHECK(big.csv.find("single_tile,") != std::string::npos);
  CHECK(big.csv.find("tile_per_session,") != std::string::npos);
}

TEST_CASE("kvstore keeps worker tiles disjoint and fault-free") {
  auto res = workload_kvstore(6);
  CHECK(res.tiles == 6);
  CHECK(res.faults == 0);

  auto wide = workload_kvstore(24);  // more workers than domains
  CHECK(wide.tiles == 24);
  CHECK(wide.faults == 0);
}
