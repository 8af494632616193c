#pragma once

#include <cstdint>
#include <vector>

#include "memscope/backend.hpp"

namespace memscope::native {

// Monotonic clock in nanoseconds (CLOCK_MONOTONIC).
std::uint64_t monotonic_ns();

// Pins the calling thread. Throws Error for core ids the OS does not have;
// returns false (no throw) when the id exists but the affinity call fails,
// so callers can degrade with a warning.
bool pin_current_thread(std::uint32_t core);

std::uint32_t online_cores();

struct NativeOptions {
  // Cap or force the worker count; 0 means "whatever the OS reports". Values
  // above the online count oversubscribe (workers share cores, pinning to
  // missing ids degrades to unpinned); useful on small machines.
  std::uint32_t cores = 0;
  std::uint64_t stop_timeout_ns = 30'000'000'000ull;
  // Pass size used by cache_hygiene to push prior contents out of the LLC.
  std::uint64_t hygiene_bytes = 8ull << 20;
  std::uint64_t llc_size_hint = 0;  // 0 = ask sysconf
};

// Runs workloads on the host for real: pinned threads, monotonic timing, one
// discarded warm-up iteration per measured workload. Cache-maintenance
// strategies have no user-space equivalent, so they degrade (with warnings)
// to their cacheable counterparts; streaming stores use non-temporal
// instructions where the build has them.
class NativeBackend : public ExecutionBackend {
 public:
  explicit NativeBackend(NativeOptions opts = {});

  std::string name() const override { return "native"; }
  std::uint32_t core_count() const override { return cores_; }
  CounterProvider& counters() override { return provider_; }

  ScenarioExecution run_scenario(const ScenarioPlan& plan) override;
  void cache_hygiene() override;
  WorkloadOutcome run_workload(const WorkloadRun& run) override;

 private:
  NativeOptions opts_;
  std::uint32_t cores_;
  NullCounterProvider provider_;
  std::vector<std::byte> hygiene_buf_;
};

}  // namespace memscope::native
