#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "utiles/engine.hpp"
#include "utiles/types.hpp"

namespace utiles::harness {

// Line-oriented scenario language. One statement per line, `#` comments.
//
//   thread <name>                      declare a principal (runs setup-first)
//   switch <thread>                    change the acting thread
//   tile <name> = create               utile_create by the acting thread
//   mmap <tile> <hex-addr> <hex-len> <perm>
//   munmap <tile> <hex-addr> <hex-len>
//   mprotect <tile> <perm>
//   malloc <var> = <tile> <size>
//   free <tile> <var>
//   read <tile|var|addr> <offset> [expected-byte]
//   write <tile|var|addr> <offset> <byte>
//   exec <tile|var|addr> <offset>
//   lock <tile>... / unlock <tile>...
//   clone <child> [pass <tile>:<+|+->...]
//   transfer <to> <tile>:+...
//   grant <to> <tile> / revoke <to> <tile>
//   declassify <tile>...
//   join <child>
//   fork <child>
//   kill <tile>
//   exit
//   posix-mmap <hex-addr> <hex-len> <perm>
//   posix-mprotect <hex-addr> <hex-len> <perm>
//   expect-fault <domain|permission|translation|policy>
//   expect-deny <reason>
//
// An expect-* statement binds to exactly the next operation on the same
// thread. An expected fault is absorbed by the runner (the supervisor
// clears the termination), so single-thread lock/fault/unlock flows keep
// running; an unexpected fault leaves the thread terminated.
struct Statement {
  enum class Kind {
    thread_decl,
    switch_to,
    tile_create,
    mmap_op,
    munmap_op,
    mprotect_op,
    malloc_op,
    free_op,
    read_op,
    write_op,
    exec_op,
    lock_op,
    unlock_op,
    clone_op,
    transfer_op,
    grant_op,
    revoke_op,
    declassify_op,
    join_op,
    fork_op,
    kill_op,
    exit_op,
    posix_mmap_op,
    posix_mprotect_op,
    expect_fault,
    expect_deny,
  };

  Kind kind;
  int line = 0;
  std::string text;  // trimmed source line, used in report output

  std::string name;    // thread/tile/var/child/recipient name
  std::string target;  // read/write/exec target token
  std::uint64_t addr = 0;
  std::uint64_t len = 0;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  Perms perms = Perms::rw;
  std::optional<std::uint8_t> byte;            // write value / read expectation
  std::vector<std::string> tiles;              // lock/unlock/declassify lists
  std::vector<std::pair<std::string, bool>> caps;  // (tile, wants_minus)
  FaultKind expected_fault = FaultKind::domain;
  Deny expected_deny = Deny::none;
};

struct Scenario {
  std::string name;
  std::vector<Statement> statements;
};

struct ParseError {
  int line = 0;
  std::string message;
};

struct ParseResult {
  std::optional<Scenario> scenario;
  ParseError error;

  bool ok() const { return scenario.has_value(); }
};

ParseResult parse_scenario(std::string_view text, std::string name = "-");

struct RunOptions {
  std::optional<std::uint64_t> interleave_seed;
  // The harness runs with every hardware domain cacheable so that the
  // documented 16-slot capacity holds.
  EngineConfig engine{mmu::kHardwareDomains, 0, false, std::nullopt};
};

struct RunReport {
  bool passed = false;
  int expectations_met = 0;
  int expectations_total = 0;
  int unexpected_failures = 0;
  std::uint64_t fault_count = 0;
  std::string text;          // deterministic human-readable report
  std::string counters_csv;  // fixed-header CSV, one `run` row
  // Per-statement outcome trace; equal across cache capacities for the
  // same scenario (the transparency property).
  std::vector<std::string> verdict_trace;
  mmu::CostCounters counters;
  cache::Stats cache;
};

RunReport run_scenario(const Scenario& sc, const RunOptions& opt = {});

// Fixed CSV contract shared by the scenario runner and the bench harness.
inline constexpr std::string_view kCsvHeader =
    "phase,dacr_writes,tlb_flushes,table_walks,domain_faults,perm_faults,"
    "cache_hits,cache_misses,cache_evictions";

std::string csv_row(std::string_view phase, const mmu::CostCounters& c, const cache::Stats& s);

}  // namespace utiles::harness
