#pragma once

#include <memory>

#include "memscope/backend.hpp"
#include "memscope/sim/engine.hpp"

namespace memscope::sim {

// Counter access over the simulated PMU. Six events per core, mirroring the
// hardware limit the methodology works under.
class SimCounterProvider : public CounterProvider {
 public:
  explicit SimCounterProvider(const SimMachine*& machine) : machine_(machine) {}
  std::vector<std::string> available_events() const override;
  std::map<std::string, std::uint64_t> sample(std::uint32_t core,
                                              const std::vector<std::string>& events) override;

 private:
  const SimMachine*& machine_;
};

class SimBackend : public ExecutionBackend {
 public:
  SimBackend(SimSystemModel model, std::vector<ModuleRange> ranges, bool record_trace = false);
  ~SimBackend() override;

  std::string name() const override { return "sim"; }
  std::uint32_t core_count() const override;
  CounterProvider& counters() override;

  void begin_experiment(std::uint64_t seed) override;
  ScenarioExecution run_scenario(const ScenarioPlan& plan) override;
  void cache_hygiene() override;

  WorkloadOutcome run_workload(const WorkloadRun& run) override;

  const TransactionTrace& trace() const;
  const SimMachine& machine() const;

 private:
  SimSystemModel model_;
  std::vector<ModuleRange> ranges_;
  bool record_trace_;
  std::unique_ptr<SimMachine> machine_;
  const SimMachine* machine_view_ = nullptr;
  SimCounterProvider provider_;
};

// Address windows of every pool the manager holds, for wiring a SimBackend
// to the same pools the coordinator allocates from.
std::vector<ModuleRange> ranges_from_pools(const PoolManager& pools);

}  // namespace memscope::sim
