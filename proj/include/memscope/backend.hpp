#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memscope/workload.hpp"

namespace memscope {

enum class Role : std::uint8_t { main, stress, idle };

std::string role_name(Role r);

// Hardware event access. Backends that cannot read counters expose an empty
// event list; callers must treat every counter as optional.
class CounterProvider {
 public:
  virtual ~CounterProvider() = default;
  virtual std::vector<std::string> available_events() const = 0;
  // How many events one core can observe at a time.
  virtual std::size_t max_events_per_core() const { return 6; }
  // Current free-running values; unknown events are simply absent.
  virtual std::map<std::string, std::uint64_t> sample(
      std::uint32_t core, const std::vector<std::string>& events) = 0;
};

class NullCounterProvider : public CounterProvider {
 public:
  std::vector<std::string> available_events() const override { return {}; }
  std::map<std::string, std::uint64_t> sample(std::uint32_t,
                                              const std::vector<std::string>&) override {
    return {};
  }
};

// What one core does during a scenario.
struct ActivityPlan {
  Role role = Role::idle;
  Strategy strategy = Strategy::idle;
  PoolBuffer buffer;                    // empty for idle
  const LatencyChain* chain = nullptr;  // set for latency strategies
  std::uint64_t target_addr = 0;        // region base + buffer offset
  // Fault-injection knobs for the synchronization protocol tests: extra time
  // before the worker reports started / before it acknowledges stop.
  std::uint64_t start_delay_ns = 0;
  std::uint64_t stop_notice_delay_ns = 0;
};

struct ScenarioPlan {
  std::uint32_t scenario_index = 0;
  std::uint32_t observed_core = 0;
  std::vector<ActivityPlan> per_core;  // index == core id
  std::uint64_t iterations = 1;
  NcMode nc_mode = NcMode::dcadd;
  std::vector<std::string> counters_main;
  std::vector<std::string> counters_others;
  std::uint64_t stop_timeout_ns = 30'000'000'000ull;
};

// Synchronization timestamps on the backend's clock (virtual ns for the
// simulator, monotonic ns for hardware). The protocol invariants are checked
// against these: every worker starts before measurement begins, measurement
// ends before stop is raised, every worker acknowledges afterwards.
struct SyncTimeline {
  std::uint64_t origin = 0;         // scenario begin
  std::uint64_t measure_start = 0;  // all workers running, main begins
  std::uint64_t measure_end = 0;    // main finished its iterations
  std::uint64_t stop_raised = 0;    // strictly after measure_end
  struct WorkerWindow {
    std::uint32_t core = 0;
    std::uint64_t started = 0;
    std::uint64_t finished = 0;  // stop acknowledged and drained
  };
  std::vector<WorkerWindow> workers;  // every core except the observed one
};

struct ScenarioExecution {
  WorkloadOutcome main;
  // core -> event -> delta over the measured window.
  std::map<std::uint32_t, std::map<std::string, std::uint64_t>> counter_deltas;
  SyncTimeline sync;
  std::vector<std::string> warnings;
};

// Common surface of the simulator and native backends. The coordinator is
// written against this only, so an experiment config runs on either.
class ExecutionBackend {
 public:
  virtual ~ExecutionBackend() = default;
  virtual std::string name() const = 0;
  virtual std::uint32_t core_count() const = 0;
  virtual CounterProvider& counters() = 0;

  virtual void begin_experiment(std::uint64_t seed) { (void)seed; }
  virtual ScenarioExecution run_scenario(const ScenarioPlan& plan) = 0;
  // Best-effort cache state reset between scenarios.
  virtual void cache_hygiene() {}
  virtual void end_experiment() {}

  // Solo workload execution outside the scenario protocol.
  virtual WorkloadOutcome run_workload(const WorkloadRun& run) = 0;
};

}  // namespace memscope
