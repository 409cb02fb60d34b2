#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "utiles/bench.hpp"
#include "utiles/scenario.hpp"

namespace {

// Non-normative timing: stdout stays byte-deterministic, the elapsed
// wall clock goes to stderr for the curious.
struct WallClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  ~WallClock() {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start)
                  .count();
    std::cerr << "# wall-clock " << ms << " ms (informational only)\n";
  }
};

int cmd_run(const std::string& path, const std::string& counters_out,
            std::optional<std::uint64_t> interleave_seed) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  auto parsed = utiles::harness::parse_scenario(buf.str(), name);
  if (!parsed.ok()) {
    std::cerr << path << ":" << parsed.error.line << ": " << parsed.error.message << "\n";
    return 2;
  }

  utiles::harness::RunOptions opt;
  opt.interleave_seed = interleave_seed;
  auto report = utiles::harness::run_scenario(*parsed.scenario, opt);
  std::cout << report.text;

  if (!counters_out.empty()) {
    std::ofstream out(counters_out);
    if (!out) {
      std::cerr << "error: cannot write " << counters_out << "\n";
      return 2;
    }
    out << report.counters_csv;
  }
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"utiles-sim: intra-process privilege separation simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string counters_out;
  std::uint64_t interleave_seed = 0;
  auto* run = app.add_subcommand("run", "parse and run a scenario file");
  run->add_option("file", scenario_path, "scenario file")->required();
  run->add_option("--counters", counters_out, "write run counters CSV to this file");
  auto* seed_opt = run->add_option("--interleave-seed", interleave_seed,
                                   "randomized thread interleaving with this seed");

  utiles::harness::BenchConfig bc;
  std::string pattern = "roundrobin";
  std::string cache_mode = "16";
  auto* bench = app.add_subcommand("bench", "mmap/munmap cost-counter benchmark");
  bench->add_option("--tiles", bc.tiles, "number of tiles")->check(CLI::Range(1u, 2048u));
  bench->add_option("--ops", bc.ops, "number of mmap/munmap cycles")
      ->check(CLI::Range(1u, 10000000u));
  bench->add_option("--pattern", pattern, "lru|roundrobin|random");
  bench->add_option("--seed", bc.seed, "rng seed for the random pattern");
  bench->add_option("--cache", cache_mode, "domain cache capacity: 16 or inf");

  std::string workload_name;
  std::uint32_t sessions = 8;
  std::uint32_t threads = 4;
  auto* workload = app.add_subcommand("workload", "synthetic keystore/kvstore workloads");
  workload->add_option("name", workload_name, "keystore|kvstore")->required();
  workload->add_option("--sessions", sessions, "keystore session count")
      ->check(CLI::Range(1u, 2048u));
  workload->add_option("--threads", threads, "kvstore worker count")->check(CLI::Range(1u, 1024u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors are exit 2; --help stays 0
  }

  try {
    WallClock wall;
    if (run->parsed()) {
      return cmd_run(scenario_path, counters_out,
                     seed_opt->count() > 0 ? std::optional<std::uint64_t>(interleave_seed)
                                           : std::nullopt);
    }
    if (bench->parsed()) {
      auto p = utiles::harness::pattern_from_string(pattern);
      if (!p) {
        std::cerr << "error: bad pattern '" << pattern << "'\n";
        return 2;
      }
      bc.pattern = *p;
      if (cache_mode == "inf") {
        bc.unbounded_cache = true;
      } else if (cache_mode != "16") {
        std::cerr << "error: --cache must be 16 or inf\n";
        return 2;
      }
      std::cout << utiles::harness::run_bench(bc).csv;
      return 0;
    }
    if (workload->parsed()) {
      if (workload_name == "keystore") {
        std::cout << utiles::harness::workload_keystore(sessions).csv;
        return 0;
      }
      if (workload_name == "kvstore") {
        std::cout << utiles::harness::workload_kvstore(threads).csv;
        return 0;
      }
      std::cerr << "error: unknown workload '" << workload_name << "'\n";
      return 2;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 2;
}
