#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memscope/backend.hpp"
#include "memscope/pools.hpp"
#include "memscope/workload.hpp"

namespace memscope {

// Shared synchronization state between the coordinator and its workers.
// started/finished hold the monotonic timestamp of the transition (0 = not
// yet), so the flag and the protocol bookkeeping are one atomic word. Only
// the coordinator resets the cell.
class SyncCell {
 public:
  explicit SyncCell(std::uint32_t cores);

  void reset();
  void mark_started(std::uint32_t core, std::uint64_t at_ns);
  void mark_finished(std::uint32_t core, std::uint64_t at_ns);
  void raise_stop(std::uint64_t at_ns);
  bool stop_requested() const { return stop_.load(std::memory_order_acquire) != 0; }

  std::uint64_t started_at(std::uint32_t core) const;
  std::uint64_t finished_at(std::uint32_t core) const;
  std::uint64_t stop_raised_at() const { return stop_.load(std::memory_order_acquire); }

  // Spin until every member core reports, or the monotonic clock passes
  // deadline_ns; returns the first core still missing on timeout.
  std::optional<std::uint32_t> wait_all_started(const std::vector<std::uint32_t>& members,
                                                std::uint64_t deadline_ns) const;
  std::optional<std::uint32_t> wait_all_finished(const std::vector<std::uint32_t>& members,
                                                 std::uint64_t deadline_ns) const;

 private:
  std::vector<std::atomic<std::uint64_t>> started_;
  std::vector<std::atomic<std::uint64_t>> finished_;
  std::atomic<std::uint64_t> stop_{0};
};

// Raises stop and collects acknowledgements. Throws Error naming the first
// unresponsive core when the timeout passes. Returns (core, ack time) pairs.
std::vector<std::pair<std::uint32_t, std::uint64_t>> stop_protocol(
    SyncCell& sync, const std::vector<std::uint32_t>& workers, std::uint64_t timeout_ns);

// One activity description from an experiment line: mapping type (only 'c',
// cacheable, is real today), a strategy, a buffer size, and the pool it is
// carved from.
struct ActivitySpec {
  char mapping = 'c';
  Strategy strategy = Strategy::read;
  std::uint64_t buffer_bytes = 0;
  std::uint32_t pool_id = 0;

  bool operator==(const ActivitySpec&) const = default;
};

struct ExperimentConfig {
  ActivitySpec main;
  ActivitySpec stress;
  std::uint64_t iterations = 500;
  std::uint64_t seed = 1;
  std::uint32_t observed_core = 0;
  std::vector<std::string> counters_main;
  std::vector<std::string> counters_others;
  NcMode nc_mode = NcMode::dcadd;
  std::uint64_t stop_timeout_ns = 30'000'000'000ull;
  // Fault-injection for protocol tests: every worker draws a uniform delay in
  // [0, max] before reporting started / acknowledging stop.
  std::uint64_t max_start_delay_ns = 0;
  std::uint64_t max_stop_delay_ns = 0;

  bool operator==(const ExperimentConfig&) const = default;
};

struct Diagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

// Static checks only; performs no allocation. Catches unknown pools, buffers
// that cannot fit even in an empty pool (worst case: the main buffer plus
// p-1 stressor buffers live at once), bad sizes, bad counter requests.
Diagnostics validate(const ExperimentConfig& config, const PoolManager& pools,
                     ExecutionBackend& backend);

// Scenario s pins the main activity to the observed core and the stressor
// strategy to the s lowest-numbered remaining cores; everything else idles.
struct ScenarioAssignment {
  std::uint32_t index = 0;
  std::vector<Role> roles;  // per core
};
std::vector<ScenarioAssignment> build_scenarios(std::uint32_t cores, std::uint32_t observed);

struct ScenarioResult {
  std::uint32_t scenario_index = 0;
  std::uint32_t stressors = 0;
  std::vector<std::uint64_t> elapsed_ns;  // one entry per measured iteration
  std::uint64_t bytes_per_iteration = 0;
  std::uint64_t lines_per_iteration = 0;
  bool latency_mode = false;  // pointer-chase main activity
  std::map<std::uint32_t, std::map<std::string, std::uint64_t>> counter_deltas;
  SyncTimeline sync;
  std::vector<std::string> warnings;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string backend;
  std::uint32_t cores = 0;
  std::vector<ScenarioResult> scenarios;
  std::vector<std::string> warnings;
};

// The full ladder: scenario 0 (solo) through p-1 stressors. Buffers are
// allocated and initialized per scenario and always returned to their pools,
// also when a scenario throws. Per-scenario hygiene runs between scenarios.
ExperimentResult run_experiment(const ExperimentConfig& config, PoolManager& pools,
                                ExecutionBackend& backend);

}  // namespace memscope
