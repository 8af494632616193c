#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memscope/workload.hpp"

namespace memscope::sim {

inline constexpr std::uint32_t kUnlimitedQueue = 0xffffffffu;

// One backing memory module (sim-side view of a pool).
struct ModuleModel {
  std::uint32_t pool_id = 0;
  std::string name;
  std::uint64_t latency_ns = 100;  // unloaded service latency per transaction
  std::uint32_t mlp_cap = 1;       // transactions the module serves at once
};

struct CacheModelConfig {
  bool present = true;
  std::uint64_t size_bytes = 1ull << 20;
  std::uint32_t ways = 16;
  std::uint64_t line_bytes = 64;
  std::uint64_t hit_latency_ns = 3;
  std::uint32_t hit_port_slots = 1;  // concurrent lookups; queueing above this
  // Optional per-core index bands, emulating page-coloring style partitions.
  // fraction[k] is core k's share of the sets, base[k] its starting offset as
  // a fraction; cores without an entry use the whole cache.
  std::map<std::uint32_t, double> partition_fraction;
  std::map<std::uint32_t, double> partition_base;

  std::uint32_t sets() const {
    return static_cast<std::uint32_t>(size_bytes / (line_bytes * ways));
  }
};

struct SimSystemModel {
  std::uint32_t cores = 4;
  // Stored as cycles per microsecond so the event engine never touches
  // floating point (1.5 GHz -> 1500).
  std::uint32_t cpu_cycles_per_us = 1500;
  std::uint32_t bus_queue_entries = 8;  // kUnlimitedQueue disables throttling
  // Per-core cap on outstanding bandwidth-stream accesses, standing in for a
  // core's load/store buffer depth.
  std::uint32_t core_issue_depth = 8;
  CacheModelConfig cache;
  std::vector<ModuleModel> modules;  // sorted by pool_id
  NcMode nc_mode = NcMode::dcadd;

  const ModuleModel* module_for_pool(std::uint32_t pool_id) const;
};

// Model file format: flat "key = value" lines, '#' comments. Keys:
//   cores, cpu_freq_ghz, core_issue_depth
//   bus.queue_entries            (number or the token "unlimited")
//   cache.size_bytes|ways|line_bytes|hit_latency_ns|hit_port_slots|present
//   cache.partition.<core>       (fraction of sets)
//   cache.partition_base.<core>  (band start as a fraction)
//   module.<pool>.name|latency_ns|mlp_cap
//   nc_mode                      (dcadd | dcafter)
// Unknown keys and malformed lines throw ParseError with the line number.
SimSystemModel parse_model(std::string_view text);
std::string render_model(const SimSystemModel& model);

// Mirror of the default platform: four cores at 1.5 GHz, 1 MiB 16-way LLC
// with one hit port, an 8-entry shared queue, DRAM-like pool 1, a slower
// PL-attached pool 2, fast small pools 3 and 4.
SimSystemModel default_model();

struct ModelDiagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

// Structural checks: positive core count and latencies, mlp caps >= 1,
// power-of-two set count, partition fractions in (0,1] with band fitting,
// queue shallower than the deepest module fan-out gets a warning (the bus
// would cap concurrency below what a module could sustain).
ModelDiagnostics validate_model(const SimSystemModel& model);

}  // namespace memscope::sim
