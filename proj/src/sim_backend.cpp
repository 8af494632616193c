#include "memscope/sim/backend.hpp"

#include <algorithm>

#include "memscope/error.hpp"

namespace memscope::sim {

std::vector<std::string> SimCounterProvider::available_events() const {
  return {"cpu_cycles", "mem_access", "l2d_cache", "l2d_cache_refill", "bus_read", "bus_write"};
}

std::map<std::string, std::uint64_t> SimCounterProvider::sample(
    std::uint32_t core, const std::vector<std::string>& events) {
  std::map<std::string, std::uint64_t> out;
  if (!machine_) return out;
  const auto all = machine_->counter_values(core);
  std::size_t taken = 0;
  for (const auto& ev : events) {
    if (taken == max_events_per_core()) break;
    if (auto it = all.find(ev); it != all.end()) {
      out[ev] = it->second;
      ++taken;
    }
  }
  return out;
}

SimBackend::SimBackend(SimSystemModel model, std::vector<ModuleRange> ranges, bool record_trace)
    : model_(std::move(model)),
      ranges_(std::move(ranges)),
      record_trace_(record_trace),
      provider_(machine_view_) {
  machine_ = std::make_unique<SimMachine>(model_, ranges_, record_trace_);
  machine_view_ = machine_.get();
}

SimBackend::~SimBackend() = default;

std::uint32_t SimBackend::core_count() const { return model_.cores; }

CounterProvider& SimBackend::counters() { return provider_; }

void SimBackend::begin_experiment(std::uint64_t) {
  // Chains and delays come pre-seeded from the coordinator; the machine
  // itself is already deterministic.
}

namespace {

CoreStream stream_for_plan(std::uint32_t core, const ActivityPlan& plan,
                           std::uint64_t iterations) {
  CoreStream s;
  s.core = core;
  s.role = plan.role;
  s.start_delay_ns = plan.start_delay_ns;
  s.stop_notice_delay_ns = plan.stop_notice_delay_ns;
  if (plan.role == Role::idle) return s;
  StreamPhase ph;
  ph.strategy = plan.strategy;
  ph.base_addr = plan.target_addr;
  ph.bytes = plan.buffer.length;
  ph.pool_id = plan.buffer.pool_id;
  ph.chain = plan.chain;
  ph.iterations = (plan.role == Role::main) ? iterations : 0;  // stressors run until stop
  s.phases.push_back(ph);
  s.record_iterations = plan.role == Role::main;
  return s;
}

}  // namespace

ScenarioExecution SimBackend::run_scenario(const ScenarioPlan& plan) {
  if (plan.per_core.size() != model_.cores)
    throw Error("scenario plan covers " + std::to_string(plan.per_core.size()) +
                " cores, the model has " + std::to_string(model_.cores));

  std::vector<CoreStream> streams;
  streams.reserve(plan.per_core.size());
  for (std::uint32_t c = 0; c < plan.per_core.size(); ++c) {
    streams.push_back(stream_for_plan(c, plan.per_core[c], plan.iterations));
  }

  const ScenarioRunOutput run =
      machine_->run_scenario(streams, plan.observed_core, plan.scenario_index, plan.nc_mode);

  ScenarioExecution out;
  out.main = run.per_core[plan.observed_core].outcome;
  out.sync = run.sync;
  for (std::uint32_t c = 0; c < model_.cores; ++c) {
    const auto& wanted = (c == plan.observed_core) ? plan.counters_main : plan.counters_others;
    if (wanted.empty()) continue;
    auto before = run.counters_before.find(c);
    auto after = run.counters_after.find(c);
    if (before == run.counters_before.end() || after == run.counters_after.end()) continue;
    std::size_t taken = 0;
    for (const auto& ev : wanted) {
      if (taken == provider_.max_events_per_core()) break;
      auto b = before->second.find(ev);
      auto a = after->second.find(ev);
      if (b == before->second.end() || a == after->second.end()) continue;
      out.counter_deltas[c][ev] = a->second - b->second;
      ++taken;
    }
  }
  return out;
}

void SimBackend::cache_hygiene() { machine_->silent_cache_reset(); }

WorkloadOutcome SimBackend::run_workload(const WorkloadRun& run) {
  CoreStream s;
  s.core = 0;
  s.role = Role::main;
  s.record_iterations = true;
  if (run.strategy == Strategy::idle) {
    s.role = Role::idle;
    s.idle_duration_ns = run.idle_duration_ns;
  } else {
    if (strategy_is_latency(run.strategy) && run.chain == nullptr)
      throw Error("latency workload needs a chain");
    if (run.buffer.length < kCacheLineBytes)
      throw Error("workload buffer is smaller than one line");
    std::uint64_t base = 0;
    bool found = false;
    for (const auto& r : ranges_) {
      if (r.pool_id == run.buffer.pool_id) {
        base = r.base;
        found = true;
        break;
      }
    }
    if (!found)
      throw Error("no module range for pool " + std::to_string(run.buffer.pool_id));
    StreamPhase ph;
    ph.strategy = run.strategy;
    ph.base_addr = run.buffer.target_addr(base);
    ph.bytes = run.buffer.length;
    ph.pool_id = run.buffer.pool_id;
    ph.chain = run.chain;
    ph.iterations = run.iterations;
    s.phases.push_back(ph);
  }
  auto per_core = machine_->run_plain({s}, run.nc_mode);
  return per_core[0].outcome;
}

const TransactionTrace& SimBackend::trace() const { return machine_->trace(); }
const SimMachine& SimBackend::machine() const { return *machine_; }

std::vector<ModuleRange> ranges_from_pools(const PoolManager& pools) {
  std::vector<ModuleRange> out;
  for (std::uint32_t id = 1; id <= pools.size(); ++id) {
    const auto& r = pools.pool(id).region();
    out.push_back({id, r.base, r.size});
  }
  return out;
}

}  // namespace memscope::sim
