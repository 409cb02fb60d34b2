#include <doctest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "utiles/domain_cache.hpp"

using namespace utiles;
using namespace utiles::cache;

namespace {

DomainCache make16() {
  std::vector<DomainId> slots;
  for (DomainId d = 0; d < 16; ++d) slots.push_back(d);
  return DomainCache::bounded(slots);
}

}  // namespace

TEST_CASE("sixteen distinct tiles fit without eviction") {
  auto c = make16();
  for (TileId t = 100; t < 116; ++t) c.attach(t);
  CHECK(c.stats().evictions == 0);
  CHECK(c.stats().misses == 16);
  CHECK(c.resident_count() == 16);
}

TEST_CASE("the seventeenth tile evicts the least recently attached") {
  auto c = make16();
  std::vector<TileId> evicted;
  c.set_hooks(nullptr, [&](TileId t, DomainId) { evicted.push_back(t); });
  for (TileId t = 100; t < 116; ++t) c.attach(t);
  c.attach(116);
  CHECK(c.stats().evictions == 1);
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0] == 100);
  CHECK(!c.slot_of(100).has_value());
}

TEST_CASE("re-attaching a resident tile is a hit and moves no slots") {
  auto c = make16();
  DomainId d = c.attach(100);
  auto before = c.stats();
  CHECK(c.attach(100) == d);
  CHECK(c.stats().hits == before.hits + 1);
  CHECK(c.stats().misses == before.misses);
}

TEST_CASE("touch changes the eviction victim") {
  auto c = make16();
  std::vector<TileId> evicted;
  c.set_hooks(nullptr, [&](TileId t, DomainId) { evicted.push_back(t); });
  c.attach(100);  // A
  c.attach(101);  // B
  CHECK(c.touch(100));
  for (TileId t = 102; t < 116; ++t) c.attach(t);  // fill remaining 14 slots
  c.attach(200);                                   // one over capacity
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0] == 101);
}

TEST_CASE("touch and detach demand residency") {
  auto c = make16();
  CHECK(!c.touch(100));
  CHECK(!c.detach(100));
  c.attach(100);
  CHECK(c.touch(100));
  CHECK(c.detach(100));
  CHECK(!c.detach(100));
}

TEST_CASE("detach then attach is a miss, not a hit") {
  auto c = make16();
  c.attach(100);
  c.detach(100);
  auto before = c.stats();
  c.attach(100);
  CHECK(c.stats().misses == before.misses + 1);
  CHECK(c.stats().hits == before.hits);
  // a detached tile was not evicted, so this is not a restore either
  CHECK(c.stats().restores == 0);
}

TEST_CASE("restores count re-installs of evicted tiles") {
  auto c = make16();
  for (TileId t = 100; t < 117; ++t) c.attach(t);  // evicts 100
  CHECK(c.stats().evictions == 1);
  c.attach(100);
  CHECK(c.stats().restores == 1);
}

TEST_CASE("stats identities hold for distinct attach sequences") {
  auto c = make16();
  for (TileId t = 100; t < 112; ++t) c.attach(t);
  const auto& s = c.stats();
  CHECK(s.misses == 12);
  CHECK(s.evictions == 0);
  CHECK(s.hits + s.misses == 12);
}

TEST_CASE("unbounded mode never evicts and hands out fresh domains") {
  auto c = DomainCache::unbounded(0);
  for (TileId t = 100; t < 150; ++t) c.attach(t);
  CHECK(c.stats().evictions == 0);
  CHECK(c.resident_count() == 50);
  CHECK(c.slot_of(100) != c.slot_of(149));
}

TEST_CASE("eviction victims follow the reference lru oracle over random traces") {
  auto c = make16();
  oracle::LruOracle ref(16);
  std::vector<TileId> evicted;
  c.set_hooks(nullptr, [&](TileId t, DomainId) { evicted.push_back(t); });

  std::mt19937 rng(1234);
  for (int i = 0; i < 10000; ++i) {
    TileId t = 100 + rng() % 40;
    int op = rng() % 10;
    if (op < 7) {
      evicted.clear();
      auto want = ref.attach(t);
      c.attach(t);
      if (want) {
        REQUIRE(evicted.size() == 1);
        CHECK(evicted[0] == *want);
      } else {
        CHECK(evicted.empty());
      }
    } else if (op < 9) {
      CHECK(c.touch(t) == ref.touch(t));
    } else {
      CHECK(c.detach(t) == ref.detach(t));
    }
    CHECK(c.resident_count() == ref.size());
    CHECK(c.resident_count() <= 16);
  }
}
