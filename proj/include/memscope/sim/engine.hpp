#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "memscope/backend.hpp"
#include "memscope/sim/model.hpp"

namespace memscope::sim {

// Address window served by one module (the sim-side face of a pool).
struct ModuleRange {
  std::uint32_t pool_id = 0;
  std::uint64_t base = 0;
  std::uint64_t size = 0;
};

enum class TxKind : std::uint8_t { read, write };

// One completed line transaction. issue is the moment the access entered the
// fabric: the shared-queue grant for module traffic, the lookup-port grant
// for pure cache hits. service_start is the module-slot grant (== issue for
// hits); [service_start, complete] is the interval a module server was held.
struct AccessRecord {
  std::uint64_t line_addr = 0;
  std::uint64_t issue = 0;
  std::uint64_t service_start = 0;
  std::uint64_t complete = 0;
  std::uint32_t core = 0;
  std::uint32_t module = 0;  // 0 for pure cache hits
  std::uint32_t scenario = 0;
  TxKind kind = TxKind::read;
  bool hit = false;
  bool writeback = false;  // dirty-victim traffic, not a demand access
};

struct SyncEvent {
  enum class Kind : std::uint8_t {
    started,
    measure_start,
    measure_end,
    stop_raised,
    stop_noticed,
    finished,
  };
  Kind kind;
  std::uint32_t core = 0;  // meaningful for per-worker events
  std::uint32_t scenario = 0;
  std::uint64_t time = 0;
};

struct TransactionTrace {
  std::vector<AccessRecord> records;
  std::vector<SyncEvent> sync;
};

// Fixed export schema: core, addr, issue, complete, hit, module.
void write_trace_csv(const TransactionTrace& trace, std::ostream& out);

// One activity phase of a core's stream. iterations == 0 means "repeat until
// the stop protocol says otherwise" (stressor behaviour).
struct StreamPhase {
  Strategy strategy = Strategy::read;
  std::uint64_t base_addr = 0;
  std::uint64_t bytes = 0;
  std::uint32_t pool_id = 0;
  const LatencyChain* chain = nullptr;
  std::uint64_t iterations = 1;
};

struct CoreStream {
  std::uint32_t core = 0;
  Role role = Role::stress;
  std::vector<StreamPhase> phases;  // empty for idle
  std::uint64_t start_delay_ns = 0;
  std::uint64_t stop_notice_delay_ns = 0;
  std::uint64_t idle_duration_ns = 0;  // plain-mode idle runs this long
  bool record_iterations = false;
};

struct CoreRunStats {
  WorkloadOutcome outcome;
  std::uint64_t started = 0;
  std::uint64_t finished = 0;
};

using CounterSnapshot = std::map<std::uint32_t, std::map<std::string, std::uint64_t>>;

struct ScenarioRunOutput {
  std::vector<CoreRunStats> per_core;  // index == core id
  SyncTimeline sync;
  CounterSnapshot counters_before;  // taken at measure_start
  CounterSnapshot counters_after;   // taken at measure_end
};

// The deterministic contention machine. Virtual time is integer nanoseconds;
// all state (clock, cache contents, counters, trace) persists across runs on
// one machine instance, which is what lets an experiment observe cross-
// scenario cache pollution unless hygiene is performed.
//
// Determinism: events are ordered by (time, schedule sequence); every
// arbitration point is round-robin over cores with ties broken by core id,
// and the only randomness (chain layout, injected delays) comes in from the
// caller pre-seeded. Two runs of the same inputs produce identical traces.
class SimMachine {
 public:
  SimMachine(SimSystemModel model, std::vector<ModuleRange> ranges, bool record_trace);
  ~SimMachine();
  SimMachine(const SimMachine&) = delete;
  SimMachine& operator=(const SimMachine&) = delete;

  // Full scenario protocol: workers start (plus injected delays), the main
  // stream measures once all have started, stop is raised strictly after the
  // measured window, workers acknowledge and drain.
  ScenarioRunOutput run_scenario(const std::vector<CoreStream>& streams,
                                 std::uint32_t observed_core, std::uint32_t scenario_index,
                                 NcMode nc_mode);

  // No protocol: every stream is finite and runs to completion.
  std::vector<CoreRunStats> run_plain(const std::vector<CoreStream>& streams, NcMode nc_mode);

  // Drops all cache contents without generating write-back traffic. Models
  // an out-of-band clean between scenarios.
  void silent_cache_reset();

  std::uint64_t now() const;
  const SimSystemModel& model() const;
  const TransactionTrace& trace() const;
  std::map<std::string, std::uint64_t> counter_values(std::uint32_t core) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SimRunResult {
  std::vector<CoreRunStats> per_core;
  TransactionTrace trace;
};

// One-shot multi-stream simulation on a fresh machine.
SimRunResult simulate(const std::vector<CoreStream>& streams, const SimSystemModel& model,
                      const std::vector<ModuleRange>& ranges);

}  // namespace memscope::sim
