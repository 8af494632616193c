// Acceptance gate. Each criterion prints exactly one [PASS]/[FAIL] line; the
// binary exits nonzero when any criterion fails. Pass --cli <path> to point
// at the built command-line tool (criterion 9 shells out to it).
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "memscope/analysis.hpp"
#include "memscope/backend.hpp"
#include "memscope/coordinator.hpp"
#include "memscope/error.hpp"
#include "memscope/region_config.hpp"
#include "memscope/sim/backend.hpp"
#include "memscope/sim/model.hpp"
#include "memscope/workload.hpp"

using namespace memscope;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw CheckFailure(what);
}

void require_close(double actual, double expected, double tol, const std::string& what) {
  if (std::fabs(actual - expected) > tol) {
    std::ostringstream os;
    os << what << ": got " << actual << ", expected " << expected << " within " << tol;
    throw CheckFailure(os.str());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Little's-law MLP arithmetic on published latency/throughput pairs.

void criterion_mlp() {
  struct Row {
    double latency_ns, tx_per_ns, expected;
  };
  const Row rows[] = {
      {161.89, 0.03, 4.85},
      {318.56, 0.014, 4.45},
      {399.49, 0.01, 3.99},
      {1386.80, 0.003, 4.16},
  };
  for (const auto& r : rows)
    require_close(mlp(r.latency_ns, r.tx_per_ns), r.expected, 0.05, "mlp row");
}

// ---------------------------------------------------------------------------
// 2. Hit-rate and cycles-per-access derivations from raw counter rows.

void criterion_counter_derivations() {
  const std::uint64_t cycles[] = {17'131'051, 26'228'725, 39'834'512, 53'836'500};
  const std::uint64_t l2d[] = {3'855'710, 3'764'331, 3'760'759, 3'748'782};
  const std::uint64_t refill[] = {5'182, 204, 1'748, 5'591};
  const double hit[] = {99.87, 99.99, 99.95, 99.85};
  const double cpa[] = {4.44, 6.97, 10.59, 14.36};
  for (int i = 0; i < 4; ++i) {
    require_close(hit_rate_percent(l2d[i], refill[i]), hit[i], 0.01, "hit rate column");
    require_close(cycles_per_access(cycles[i], l2d[i]), cpa[i], 0.01, "cycles/access column");
  }
}

// ---------------------------------------------------------------------------
// 3. Two-node device-tree fragment parses bit-exactly and pools follow order.

void criterion_dts() {
  const char* doc = R"(
bram@a0000000 {
  device_type = "memory";
  compatible = "mempool";
  reg = <0x0 0xa0000000 0x0 0x100000>;
};
dram@10000000 {
  compatible = "mempool";
  reg = <0x0 0x10000000 0x0 0x10000000>;
};
)";
  const auto parsed = parse_region_config(doc);
  require(parsed.diagnostics.empty(), "unexpected parse diagnostics");
  require(parsed.regions.size() == 2, "expected two regions");
  require(parsed.regions[0].base == 0xa0000000ull, "first base");
  require(parsed.regions[0].size == (1ull << 20), "first size");
  require(parsed.regions[1].base == 0x10000000ull, "second base");
  require(parsed.regions[1].size == (256ull << 20), "second size");

  auto pools = PoolManager::create(parsed.regions);
  require(pools.size() == 2, "expected two pools");
  require(pools.pool(1).region().base == 0xa0000000ull, "pool 1 binding");
  require(pools.pool(2).region().base == 0x10000000ull, "pool 2 binding");
}

// ---------------------------------------------------------------------------
// 4. Every generated chain is a single N-cycle (brute-force walk oracle).

void criterion_chains() {
  std::vector<char> visited;
  for (std::uint32_t n = 1; n <= 1024; ++n) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto chain = make_latency_chain(n, seed);
      require(chain.lines == n, "chain line count");
      require(chain.next.size() == n, "chain table size");
      visited.assign(n, 0);
      std::uint32_t at = chain.start;
      for (std::uint32_t step = 0; step < n; ++step) {
        require(at < n, "chain index out of range");
        require(!visited[at], "chain revisits a line early");
        visited[at] = 1;
        at = chain.next[at];
      }
      require(at == chain.start, "walk does not return to start after n steps");
    }
  }
}

// ---------------------------------------------------------------------------
// 5. Scenario ladder shape for every core count and observed-core choice.

void criterion_ladder() {
  for (std::uint32_t p = 1; p <= 16; ++p) {
    for (std::uint32_t observed = 0; observed < p; ++observed) {
      const auto ladder = build_scenarios(p, observed);
      require(ladder.size() == p, "ladder length");
      for (std::uint32_t s = 0; s < p; ++s) {
        const auto& a = ladder[s];
        require(a.index == s, "scenario index");
        require(a.roles.size() == p, "role vector length");
        require(a.roles[observed] == Role::main, "observed core not main");
        std::uint32_t stressors = 0, mains = 0;
        for (const Role r : a.roles) {
          stressors += (r == Role::stress);
          mains += (r == Role::main);
        }
        require(mains == 1, "exactly one main");
        require(stressors == s, "scenario s must hold s stressors");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 6. Synchronization containment under randomized start/stop delays, checked
//    against the synchronization timeline and the transaction trace.

void criterion_sync_containment() {
  const Strategy stress_pool[] = {Strategy::read,     Strategy::write,   Strategy::nc_read,
                                  Strategy::nc_write, Strategy::latency, Strategy::stream_write};
  for (int trial = 0; trial < 200; ++trial) {
    SplitMix64 rng(0x6AC0 + trial);
    const std::uint32_t cores = 2 + static_cast<std::uint32_t>(rng.below(3));

    auto model = sim::default_model();
    model.cores = cores;
    // Expensive accesses keep event counts low while virtual delay windows
    // stay in the requested 0-10 ms range.
    model.cache.present = (rng.below(2) == 0);
    model.cache.hit_latency_ns = 2'000 + rng.below(8'000);
    for (auto& m : model.modules) {
      m.latency_ns = 10'000 + rng.below(90'000);
      m.mlp_cap = 1 + static_cast<std::uint32_t>(rng.below(4));
    }
    if (rng.below(4) == 0) model.bus_queue_entries = sim::kUnlimitedQueue;

    auto pools = PoolManager::create(default_regions());
    sim::SimBackend backend(model, sim::ranges_from_pools(pools), true);

    ExperimentConfig config;
    config.main = {'c', rng.below(2) ? Strategy::read : Strategy::write,
                   64 * (16 + rng.below(49)), 1 + static_cast<std::uint32_t>(rng.below(4))};
    config.stress = {'c', stress_pool[rng.below(6)], 64 * (16 + rng.below(49)),
                     1 + static_cast<std::uint32_t>(rng.below(4))};
    config.iterations = 1 + rng.below(3);
    config.seed = rng.next();
    config.observed_core = static_cast<std::uint32_t>(rng.below(cores));
    config.max_start_delay_ns = 10'000'000;
    config.max_stop_delay_ns = 10'000'000;

    const auto result = run_experiment(config, pools, backend);
    require(result.scenarios.size() == cores, "ladder length");
    for (const auto& sr : result.scenarios) {
      const auto& sync = sr.sync;
      require(sync.measure_start <= sync.measure_end, "measured window inverted");
      require(sync.measure_end < sync.stop_raised, "stop not strictly after the window");
      require(sync.workers.size() == cores - 1, "worker coverage");
      for (const auto& w : sync.workers) {
        require(w.started != 0 && w.started <= sync.measure_start,
                "worker started after measurement began");
        require(w.finished >= sync.stop_raised, "worker finished before stop was raised");
      }
    }

    // Scenario isolation on the trace: the machine drains fully between
    // scenarios, so record scenario tags never interleave and every access of
    // scenario s completes before the first access of s+1 issues.
    const auto& trace = backend.trace().records;
    std::uint64_t last_complete = 0;
    std::uint32_t last_scenario = 0;
    for (const auto& rec : trace) {
      require(rec.scenario >= last_scenario, "trace interleaves scenarios");
      if (rec.scenario > last_scenario) {
        require(rec.issue >= last_complete, "scenario issued before the previous one drained");
        last_scenario = rec.scenario;
        last_complete = 0;
      }
      last_complete = std::max(last_complete, rec.complete);
    }
  }
}

// ---------------------------------------------------------------------------
// 7. Qualitative contention behaviour on the default model.

ExperimentResult run_default_experiment(const ExperimentConfig& config,
                                        const sim::SimSystemModel& model) {
  auto pools = PoolManager::create(default_regions());
  sim::SimBackend backend(model, sim::ranges_from_pools(pools), false);
  return run_experiment(config, pools, backend);
}

std::vector<double> median_bandwidths(const ExperimentResult& result) {
  std::vector<double> medians;
  for (const auto& sr : result.scenarios) medians.push_back(bandwidth_summary(sr).median);
  return medians;
}

struct QualitativeTimes {
  double a = 0, b = 0, c = 0, d = 0;
};

void criterion_qualitative(QualitativeTimes& times) {
  const auto model = sim::default_model();

  // (a) read bandwidth is non-increasing in stressor count.
  auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig rr;
  rr.main = {'c', Strategy::read, 2 << 20, 1};
  rr.stress = {'c', Strategy::read, 2 << 20, 1};
  rr.iterations = 11;
  const auto rr_result = run_default_experiment(rr, model);
  const auto rr_bw = median_bandwidths(rr_result);
  require(rr_bw.size() == 4, "expected the full 4-core ladder");
  for (std::size_t s = 1; s < rr_bw.size(); ++s)
    require(rr_bw[s] <= rr_bw[s - 1] * (1.0 + 1e-9), "bandwidth increased with more stressors");
  times.a = seconds_since(t0);
  require(times.a < 10.0, "sub-check (a) exceeded 10 s");

  // (b) write stressors hurt more than read stressors (allocate + write-back
  // doubles the bus traffic per missed line).
  t0 = std::chrono::steady_clock::now();
  ExperimentConfig rw = rr;
  rw.stress.strategy = Strategy::write;
  const auto rw_bw = median_bandwidths(run_default_experiment(rw, model));
  require(rw_bw[3] < rr_bw[3], "write stressors did not degrade harder than read stressors");
  times.b = seconds_since(t0);
  require(times.b < 10.0, "sub-check (b) exceeded 10 s");

  // (c) finite shared-queue throttling: stressors on the slow module choke a
  // fast-module reader; lifting the queue limit removes the effect.
  t0 = std::chrono::steady_clock::now();
  ExperimentConfig het;
  het.main = {'c', Strategy::read, 4 << 20, 1};
  het.stress = {'c', Strategy::read, 4 << 20, 2};
  het.iterations = 9;
  const auto throttled = median_bandwidths(run_default_experiment(het, model));
  const double throttled_drop = 1.0 - throttled[3] / throttled[0];
  require(throttled_drop >= 0.20, "finite queue drop below 20%");

  auto unlimited_model = model;
  unlimited_model.bus_queue_entries = sim::kUnlimitedQueue;
  const auto unlimited = median_bandwidths(run_default_experiment(het, unlimited_model));
  const double unlimited_drop = 1.0 - unlimited[3] / unlimited[0];
  require(unlimited_drop < 0.02, "unlimited queue should stay within 2%");
  times.c = seconds_since(t0);
  require(times.c < 10.0, "sub-check (c) exceeded 10 s");

  // (d) all-hit working sets: cycles/access grows >= 2x through hit-port
  // contention while the hit rate stays above 99%.
  t0 = std::chrono::steady_clock::now();
  ExperimentConfig hit;
  hit.main = {'c', Strategy::read, 256 << 10, 1};
  hit.stress = {'c', Strategy::read, 256 << 10, 1};
  hit.iterations = 250;
  hit.counters_main = {"cpu_cycles", "l2d_cache", "l2d_cache_refill"};
  const auto hit_result = run_default_experiment(hit, model);

  const auto cpa_of = [&](const ScenarioResult& sr) {
    const auto& main_ctrs = sr.counter_deltas.at(hit_result.config.observed_core);
    const double rate = hit_rate_percent(main_ctrs.at("l2d_cache"), main_ctrs.at("l2d_cache_refill"));
    require(rate > 99.0, "hit rate fell below 99%");
    return cycles_per_access(main_ctrs.at("cpu_cycles"), main_ctrs.at("l2d_cache"));
  };
  const double solo = cpa_of(hit_result.scenarios[0]);
  const double loaded = cpa_of(hit_result.scenarios[3]);
  require(loaded >= 2.0 * solo, "cycles/access grew less than 2x");
  times.d = seconds_since(t0);
  require(times.d < 10.0, "sub-check (d) exceeded 10 s");
}

// ---------------------------------------------------------------------------
// 8. Pools return to their initial state after every experiment, including
//    aborted ones.

class FailingBackend : public ExecutionBackend {
 public:
  FailingBackend(ExecutionBackend& inner, std::uint32_t fail_at)
      : inner_(inner), fail_at_(fail_at) {}

  std::string name() const override { return inner_.name(); }
  std::uint32_t core_count() const override { return inner_.core_count(); }
  CounterProvider& counters() override { return inner_.counters(); }
  void begin_experiment(std::uint64_t seed) override { inner_.begin_experiment(seed); }
  void cache_hygiene() override { inner_.cache_hygiene(); }
  void end_experiment() override { inner_.end_experiment(); }
  WorkloadOutcome run_workload(const WorkloadRun& run) override { return inner_.run_workload(run); }

  ScenarioExecution run_scenario(const ScenarioPlan& plan) override {
    if (ran_++ == fail_at_) throw Error("injected scenario failure");
    return inner_.run_scenario(plan);
  }

 private:
  ExecutionBackend& inner_;
  std::uint32_t fail_at_;
  std::uint32_t ran_ = 0;
};

void criterion_neutrality() {
  const Strategy all[] = {Strategy::read,     Strategy::write,      Strategy::latency,
                          Strategy::nc_read,  Strategy::nc_write,   Strategy::nc_latency,
                          Strategy::stream_write};
  auto pools = PoolManager::create(default_regions());
  sim::SimBackend backend(sim::default_model(), sim::ranges_from_pools(pools), false);

  std::vector<std::uint64_t> baseline_free;
  for (std::uint32_t id = 1; id <= pools.size(); ++id)
    baseline_free.push_back(pools.pool(id).free_pages());
  const std::string baseline_status = pools.status();

  const auto check_neutral = [&](const char* when) {
    for (std::uint32_t id = 1; id <= pools.size(); ++id) {
      require(pools.pool(id).free_pages() == baseline_free[id - 1],
              std::string("free pages drifted ") + when);
      require(pools.pool(id).live_allocations() == 0,
              std::string("allocations leaked ") + when);
    }
    require(pools.status() == baseline_status, std::string("pool status drifted ") + when);
  };

  SplitMix64 rng(0xACCE55);
  for (int trial = 0; trial < 40; ++trial) {
    ExperimentConfig config;
    config.main = {'c', all[rng.below(7)], 64 * (1 + rng.below(1024)),
                   1 + static_cast<std::uint32_t>(rng.below(4))};
    config.stress = {'c', all[rng.below(7)], 64 * (1 + rng.below(1024)),
                     1 + static_cast<std::uint32_t>(rng.below(4))};
    config.iterations = 1 + rng.below(3);
    config.seed = rng.next();
    if (trial % 5 == 4) config.main.pool_id = 9;  // validation failure path

    try {
      if (trial % 3 == 2) {
        FailingBackend failing(backend, static_cast<std::uint32_t>(rng.below(4)));
        run_experiment(config, pools, failing);
      } else {
        run_experiment(config, pools, backend);
      }
    } catch (const Error&) {
      // Injected faults and invalid configs are part of the property.
    }
    check_neutral("after an experiment");
  }
}

// ---------------------------------------------------------------------------
// 9. CLI round trip: the shipped binary's CSV equals an in-process rerun.

void criterion_cli(const std::string& cli_path) {
  require(!cli_path.empty(), "--cli <path> was not provided");
  const std::string out_path = "acceptance_cli_results.csv";
  std::remove(out_path.c_str());

  const std::string cmd =
      cli_path + " simulate --exp \"c r 4M 1 ; c w 4M 1\" --out " + out_path + " > /dev/null";
  const int rc = std::system(cmd.c_str());
  require(rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0, "CLI exited nonzero");

  std::ifstream in(out_path);
  require(in.good(), "CLI produced no results file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string cli_csv = buf.str();

  const auto parsed = parse_results_csv(cli_csv);
  require(parsed.rows.size() == 4, "expected one row per ladder scenario");
  require(parsed.columns.size() == 10, "unexpected column count");
  require(parsed.columns[0] == "scenario" && parsed.columns[8] == "bw_med_MBps",
          "unexpected schema");

  ExperimentConfig config;
  config.main = {'c', Strategy::read, 4 << 20, 1};
  config.stress = {'c', Strategy::write, 4 << 20, 1};
  auto pools = PoolManager::create(default_regions());
  sim::SimBackend backend(sim::default_model(), sim::ranges_from_pools(pools), false);
  const auto result = run_experiment(config, pools, backend);

  require(write_results_csv(result) == cli_csv, "CLI CSV differs from the in-process rerun");
  std::remove(out_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli_path;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--cli" && i + 1 < argc) cli_path = argv[++i];
  }

  struct Criterion {
    int number;
    std::string label;
    double budget_s;  // 0 = no stated bound
    std::function<void()> body;
  };

  QualitativeTimes qual;
  const std::vector<Criterion> criteria = {
      {1, "MLP arithmetic", 1.0, criterion_mlp},
      {2, "counter-table derivations", 1.0, criterion_counter_derivations},
      {3, "device-tree region discovery", 0.0, criterion_dts},
      {4, "latency chains are single cycles", 30.0, criterion_chains},
      {5, "scenario ladder shape", 5.0, criterion_ladder},
      {6, "synchronization containment", 60.0, criterion_sync_containment},
      {7, "qualitative contention reproduction", 0.0, [&qual] { criterion_qualitative(qual); }},
      {8, "pool resource neutrality", 30.0, criterion_neutrality},
      {9, "CLI results round trip", 0.0, [&cli_path] { criterion_cli(cli_path); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed = seconds_since(t0);
    if (error.empty() && c.budget_s > 0.0 && elapsed >= c.budget_s) {
      std::ostringstream os;
      os << "exceeded the " << c.budget_s << " s budget";
      error = os.str();
    }

    std::ostringstream line;
    line << (error.empty() ? "[PASS]" : "[FAIL]") << " criterion " << c.number << ": " << c.label
         << " (" << std::fixed << std::setprecision(2) << elapsed << " s";
    if (c.number == 7)
      line << "; a=" << qual.a << " b=" << qual.b << " c=" << qual.c << " d=" << qual.d;
    line << ")";
    if (!error.empty()) line << " - " << error;
    std::cout << line.str() << std::endl;
    failures += error.empty() ? 0 : 1;
  }

  return failures == 0 ? 0 : 1;
}
