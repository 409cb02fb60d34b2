#include <doctest.h>

#include <fstream>
#include <sstream>

#include "utiles/scenario.hpp"

using namespace utiles;
using namespace utiles::harness;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(SCENARIOS_DIR) + "/" + name);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scenario parse_ok(const std::string& text, const std::string& name = "-") {
  auto r = parse_scenario(text, name);
  if (!r.ok()) {
    FAIL("parse error at line ", r.error.line, ": ", r.error.message);
  }
  return *r.scenario;
}

}  // namespace

TEST_CASE("a thread declaration and a create parse as two statements") {
  auto sc = parse_ok("thread main\ntile K = create\n");
  CHECK(sc.statements.size() == 2);
  CHECK(sc.statements[0].kind == Statement::Kind::thread_decl);
  CHECK(sc.statements[1].kind == Statement::Kind::tile_create);
}

TEST_CASE("references must be declared before use, with the line reported") {
  auto r = parse_scenario("thread main\nmmap K 0x00100000 64 rw\n");
  REQUIRE(!r.ok());
  CHECK(r.error.line == 2);
  CHECK(r.error.message.find("unknown tile 'K'") != std::string::npos);

  auto r2 = parse_scenario("thread main\nswitch t2\n");
  REQUIRE(!r2.ok());
  CHECK(r2.error.line == 2);
}

TEST_CASE("statements before any thread declaration are rejected") {
  auto r = parse_scenario("tile K = create\n");
  REQUIRE(!r.ok());
  CHECK(r.error.line == 1);
}

TEST_CASE("expect statements must guard a following operation") {
  auto r = parse_scenario("thread main\nexpect-fault domain\n");
  REQUIRE(!r.ok());
  auto r2 = parse_scenario("thread main\ntile K = create\nexpect-fault domain\nswitch main\n");
  REQUIRE(!r2.ok());
  CHECK(r2.error.line == 3);
}

TEST_CASE("unknown keywords and malformed operands name their line") {
  auto r = parse_scenario("thread main\nfrobnicate K\n");
  REQUIRE(!r.ok());
  CHECK(r.error.line == 2);
  auto r2 = parse_scenario("thread main\ntile K = create\nmmap K zzz 64 rw\n");
  REQUIRE(!r2.ok());
  CHECK(r2.error.line == 3);
  auto r3 = parse_scenario("thread main\ntile K = create\nmprotect K rww\n");
  REQUIRE(!r3.ok());
  CHECK(r3.error.line == 3);
}

TEST_CASE("the listing-1 transcription parses and runs green") {
  auto sc = parse_ok(slurp("listing1.scn"), "listing1");
  auto rep = run_scenario(sc);
  INFO(rep.text);
  CHECK(rep.passed);
  CHECK(rep.expectations_met == 1);
  CHECK(rep.expectations_total == 1);
  CHECK(rep.unexpected_failures == 0);
  CHECK(rep.fault_count == 1);  // exactly the locked-phase read
}

TEST_CASE("unexpected denies fail the run") {
  auto sc = parse_ok(
      "thread main\n"
      "thread t2\n"
      "tile K = create\n"
      "mmap K 0x00100000 64 rw\n"
      "switch t2\n"
      "mprotect K ro\n");
  auto rep = run_scenario(sc);
  CHECK(!rep.passed);
  CHECK(rep.unexpected_failures == 1);
  CHECK(rep.text.find("deny no-plus-cap") != std::string::npos);
}

TEST_CASE("read byte assertions are checked") {
  auto sc = parse_ok(
      "thread main\n"
      "tile K = create\n"
      "mmap K 0x00100000 64 rw\n"
      "write K 0 9\n"
      "read K 0 10\n");
  auto rep = run_scenario(sc);
  CHECK(!rep.passed);
  CHECK(rep.text.find("got 9 want 10") != std::string::npos);
}

TEST_CASE("a mismatched expectation is reported, not crashed") {
  auto sc = parse_ok(
      "thread main\n"
      "tile K = create\n"
      "mmap K 0x00100000 64 rw\n"
      "expect-fault domain\n"
      "read K 0\n");
  auto rep = run_scenario(sc);
  CHECK(!rep.passed);
  CHECK(rep.expectations_met == 0);
  CHECK(rep.expectations_total == 1);
}

TEST_CASE("script-order runs are deterministic") {
  auto text = slurp("cross_thread_theft.scn");
  auto sc = parse_ok(text, "theft");
  auto a = run_scenario(sc);
  auto b = run_scenario(sc);
  CHECK(a.text == b.text);
  CHECK(a.counters_csv == b.counters_csv);
}

TEST_CASE("interleaved runs are deterministic under a fixed seed") {
  auto sc = parse_ok(
      "thread main\n"
      "tile K = create\n"
      "mmap K 0x00100000 0x1000 rw\n"
      "write K 0 1\n"
      "clone child pass K:+\n"
      "switch child\n"
      "read K 0 1\n"
      "exit\n"
      "switch main\n"
      "join child\n"
      "read K 0 1\n",
      "interleave");
  RunOptions opt;
  opt.interleave_seed = 42;
  auto a = run_scenario(sc, opt);
  auto b = run_scenario(sc, opt);
  CHECK(a.passed);
  CHECK(a.text == b.text);

  // join blocks until the child exits, whatever the seed
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 99ull}) {
    RunOptions o;
    o.interleave_seed = seed;
    auto rep = run_scenario(sc, o);
    INFO("seed ", seed, "\n", rep.text);
    CHECK(rep.passed);
  }
}

TEST_CASE("the attack corpus denies and the benign twins run clean") {
  const char* attacks[] = {"overread_locked.scn", "cross_thread_theft.scn", "fork_leak.scn",
                           "posix_mprotect.scn", "cap_escalation.scn"};
  for (const char* name : attacks) {
    auto rep = run_scenario(parse_ok(slurp(name), name));
    INFO(name, "\n", rep.text);
    CHECK(rep.passed);
    CHECK(rep.expectations_total >= 1);
  }
  const char* benign[] = {"overread_locked_benign.scn", "cross_thread_theft_benign.scn",
                          "fork_leak_benign.scn", "posix_mprotect_benign.scn",
                          "cap_escalation_benign.scn"};
  for (const char* name : benign) {
    auto rep = run_scenario(parse_ok(slurp(name), name));
    INFO(name, "\n", rep.text);
    CHECK(rep.passed);
    CHECK(rep.fault_count == 0);
  }
}

TEST_CASE("the counters csv carries the fixed header") {
  auto sc = parse_ok("thread main\ntile K = create\n");
  auto rep = run_scenario(sc);
  CHECK(rep.counters_csv.rfind("phase,dacr_writes,tlb_flushes,table_walks,domain_faults,"
                               "perm_faults,cache_hits,cache_misses,cache_evictions\n",
                               0) == 0);
  CHECK(rep.counters_csv.find("\nrun,") != std::string::npos);
}