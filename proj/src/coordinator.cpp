#include "memscope/coordinator.hpp"

#include <sched.h>

#include <algorithm>
#include <memory>

#include "memscope/error.hpp"
#include "memscope/native/backend.hpp"

namespace memscope {

SyncCell::SyncCell(std::uint32_t cores) : started_(cores), finished_(cores) {
  for (auto& a : started_) a.store(0, std::memory_order_relaxed);
  for (auto& a : finished_) a.store(0, std::memory_order_relaxed);
}

void SyncCell::reset() {
  for (auto& a : started_) a.store(0, std::memory_order_release);
  for (auto& a : finished_) a.store(0, std::memory_order_release);
  stop_.store(0, std::memory_order_release);
}

void SyncCell::mark_started(std::uint32_t core, std::uint64_t at_ns) {
  started_[core].store(at_ns ? at_ns : 1, std::memory_order_release);
}

void SyncCell::mark_finished(std::uint32_t core, std::uint64_t at_ns) {
  finished_[core].store(at_ns ? at_ns : 1, std::memory_order_release);
}

void SyncCell::raise_stop(std::uint64_t at_ns) {
  stop_.store(at_ns ? at_ns : 1, std::memory_order_release);
}

std::uint64_t SyncCell::started_at(std::uint32_t core) const {
  return started_[core].load(std::memory_order_acquire);
}

std::uint64_t SyncCell::finished_at(std::uint32_t core) const {
  return finished_[core].load(std::memory_order_acquire);
}

namespace {

std::optional<std::uint32_t> wait_all(const std::vector<std::atomic<std::uint64_t>>& flags,
                                      const std::vector<std::uint32_t>& members,
                                      std::uint64_t deadline_ns) {
  for (;;) {
    std::optional<std::uint32_t> missing;
    for (const std::uint32_t c : members) {
      if (flags[c].load(std::memory_order_acquire) == 0) {
        missing = c;
        break;
      }
    }
    if (!missing) return std::nullopt;
    if (native::monotonic_ns() >= deadline_ns) return missing;
    sched_yield();
  }
}

}  // namespace

std::optional<std::uint32_t> SyncCell::wait_all_started(const std::vector<std::uint32_t>& members,
                                                        std::uint64_t deadline_ns) const {
  return wait_all(started_, members, deadline_ns);
}

std::optional<std::uint32_t> SyncCell::wait_all_finished(const std::vector<std::uint32_t>& members,
                                                         std::uint64_t deadline_ns) const {
  return wait_all(finished_, members, deadline_ns);
}

std::vector<std::pair<std::uint32_t, std::uint64_t>> stop_protocol(
    SyncCell& sync, const std::vector<std::uint32_t>& workers, std::uint64_t timeout_ns) {
  sync.raise_stop(native::monotonic_ns());
  if (auto missing = sync.wait_all_finished(workers, native::monotonic_ns() + timeout_ns)) {
    throw Error("stop protocol timed out: core " + std::to_string(*missing) +
                " never acknowledged");
  }
  std::vector<std::pair<std::uint32_t, std::uint64_t>> acks;
  acks.reserve(workers.size());
  for (const std::uint32_t c : workers) acks.emplace_back(c, sync.finished_at(c));
  return acks;
}

// ---------------------------------------------------------------------------

std::string role_name(Role r) {
  switch (r) {
    case Role::main: return "main";
    case Role::stress: return "stress";
    case Role::idle: return "idle";
  }
  return "?";
}

namespace {

std::uint64_t pages_for(std::uint64_t bytes, std::uint64_t page) {
  return (bytes + page - 1) / page;
}

void check_spec(const ActivitySpec& spec, const char* which, const PoolManager& pools,
                Diagnostics& d) {
  if (spec.mapping != 'c') {
    d.errors.push_back(std::string(which) + ": mapping type '" + std::string(1, spec.mapping) +
                       "' is not supported (only 'c', cacheable)");
  }
  if (spec.strategy == Strategy::idle) {
    d.errors.push_back(std::string(which) + ": idle is not a requestable strategy");
  }
  if (spec.buffer_bytes < kCacheLineBytes || spec.buffer_bytes % kCacheLineBytes != 0) {
    d.errors.push_back(std::string(which) + ": buffer size " +
                       std::to_string(spec.buffer_bytes) + " must be a positive multiple of " +
                       std::to_string(kCacheLineBytes) + " bytes");
  }
  if (!pools.has_pool(spec.pool_id)) {
    d.errors.push_back(std::string(which) + ": no such pool " + std::to_string(spec.pool_id));
  }
}

}  // namespace

Diagnostics validate(const ExperimentConfig& config, const PoolManager& pools,
                     ExecutionBackend& backend) {
  Diagnostics d;
  check_spec(config.main, "main activity", pools, d);
  check_spec(config.stress, "stress activity", pools, d);
  if (config.iterations == 0) d.errors.push_back("iterations must be at least 1");

  const std::uint32_t cores = backend.core_count();
  if (cores == 0) d.errors.push_back("backend reports zero cores");
  if (config.observed_core >= cores && cores > 0)
    d.errors.push_back("observed core " + std::to_string(config.observed_core) +
                       " is outside 0.." + std::to_string(cores - 1));

  // Worst-case residency: the ladder's last scenario holds the main buffer
  // plus cores-1 stressor buffers at once. Buffers round up to whole pages.
  if (d.ok()) {
    const std::uint32_t stressors = cores - 1;
    std::map<std::uint32_t, std::uint64_t> pages_needed;
    const auto& mp = pools.pool(config.main.pool_id);
    pages_needed[config.main.pool_id] +=
        pages_for(config.main.buffer_bytes, mp.page_size());
    const auto& sp = pools.pool(config.stress.pool_id);
    pages_needed[config.stress.pool_id] +=
        stressors * pages_for(config.stress.buffer_bytes, sp.page_size());
    for (const auto& [pool_id, pages] : pages_needed) {
      const auto& p = pools.pool(pool_id);
      if (pages > p.total_pages()) {
        d.errors.push_back("buffer exceeds pool " + std::to_string(pool_id) + ": worst case " +
                           std::to_string(pages) + " pages, pool holds " +
                           std::to_string(p.total_pages()));
      }
    }
  }

  const std::size_t cap = backend.counters().max_events_per_core();
  if (config.counters_main.size() > cap)
    d.warnings.push_back("main counter set has " + std::to_string(config.counters_main.size()) +
                         " events, only the first " + std::to_string(cap) + " will be used");
  if (config.counters_others.size() > cap)
    d.warnings.push_back("other-core counter set has " +
                         std::to_string(config.counters_others.size()) + " events, only the first " +
                         std::to_string(cap) + " will be used");
  const auto available = backend.counters().available_events();
  for (const auto& list : {config.counters_main, config.counters_others}) {
    for (const auto& ev : list) {
      if (std::find(available.begin(), available.end(), ev) == available.end())
        d.warnings.push_back("counter '" + ev + "' is unavailable on the " + backend.name() +
                             " backend and will be absent from results");
    }
  }
  return d;
}

std::vector<ScenarioAssignment> build_scenarios(std::uint32_t cores, std::uint32_t observed) {
  if (observed >= cores) throw Error("observed core outside the core set");
  std::vector<ScenarioAssignment> out;
  for (std::uint32_t s = 0; s < cores; ++s) {
    ScenarioAssignment a;
    a.index = s;
    a.roles.assign(cores, Role::idle);
    a.roles[observed] = Role::main;
    std::uint32_t placed = 0;
    for (std::uint32_t c = 0; c < cores && placed < s; ++c) {
      if (c == observed) continue;
      a.roles[c] = Role::stress;
      ++placed;
    }
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

// Frees every allocation it still holds; keeps pools neutral when a scenario
// throws mid-flight.
struct BufferGuard {
  PoolManager& pools;
  std::vector<PoolBuffer> held;

  explicit BufferGuard(PoolManager& p) : pools(p) {}
  ~BufferGuard() {
    for (const auto& b : held) {
      try {
        pools.pool(b.pool_id).free(b);
      } catch (...) {
        // Avoid throwing out of the destructor during unwinding.
      }
    }
  }
  PoolBuffer take(std::uint32_t pool_id, std::uint64_t bytes) {
    PoolBuffer b = pools.pool(pool_id).alloc(bytes);
    held.push_back(b);
    return b;
  }
};

std::uint64_t chain_seed_for(std::uint64_t seed, std::uint32_t core) {
  SplitMix64 rng(seed + 0x517cc1b727220a95ull * (core + 1));
  return rng.next();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, PoolManager& pools,
                                ExecutionBackend& backend) {
  Diagnostics diag = validate(config, pools, backend);
  if (!diag.ok()) {
    std::string msg = "invalid experiment:";
    for (const auto& e : diag.errors) msg += "\n  " + e;
    throw Error(msg);
  }

  ExperimentResult result;
  result.config = config;
  result.backend = backend.name();
  result.cores = backend.core_count();
  result.warnings = diag.warnings;

  pools.attach_backing();
  backend.begin_experiment(config.seed);

  const auto scenarios = build_scenarios(backend.core_count(), config.observed_core);
  SplitMix64 delay_rng(config.seed ^ 0xd1b54a32d192ed03ull);

  for (const auto& assignment : scenarios) {
    BufferGuard guard(pools);
    std::vector<std::unique_ptr<LatencyChain>> chains;

    ScenarioPlan plan;
    plan.scenario_index = assignment.index;
    plan.observed_core = config.observed_core;
    plan.iterations = config.iterations;
    plan.nc_mode = config.nc_mode;
    plan.counters_main = config.counters_main;
    plan.counters_others = config.counters_others;
    plan.stop_timeout_ns = config.stop_timeout_ns;
    plan.per_core.resize(assignment.roles.size());

    for (std::uint32_t c = 0; c < assignment.roles.size(); ++c) {
      ActivityPlan& ap = plan.per_core[c];
      ap.role = assignment.roles[c];
      if (config.max_start_delay_ns && ap.role != Role::main)
        ap.start_delay_ns = delay_rng.below(config.max_start_delay_ns + 1);
      if (config.max_stop_delay_ns && ap.role != Role::main)
        ap.stop_notice_delay_ns = delay_rng.below(config.max_stop_delay_ns + 1);
      if (ap.role == Role::idle) {
        ap.strategy = Strategy::idle;
        continue;
      }

      const ActivitySpec& spec = (ap.role == Role::main) ? config.main : config.stress;
      ap.strategy = spec.strategy;
      ap.buffer = guard.take(spec.pool_id, spec.buffer_bytes);
      ap.target_addr = ap.buffer.target_addr(pools.pool(spec.pool_id).region().base);
      if (strategy_is_latency(spec.strategy)) {
        const auto lines = static_cast<std::uint32_t>(spec.buffer_bytes / kCacheLineBytes);
        const std::uint64_t seed =
            (ap.role == Role::main) ? config.seed : chain_seed_for(config.seed, c);
        chains.push_back(std::make_unique<LatencyChain>(make_latency_chain(lines, seed)));
        ap.chain = chains.back().get();
        write_chain(*ap.chain, ap.buffer);
      } else {
        init_bandwidth_buffer(ap.buffer);
      }
    }

    ScenarioExecution exec = backend.run_scenario(plan);

    ScenarioResult sr;
    sr.scenario_index = assignment.index;
    sr.stressors = assignment.index;
    sr.elapsed_ns = exec.main.per_iteration_ns;
    sr.bytes_per_iteration = config.main.buffer_bytes;
    sr.lines_per_iteration = config.main.buffer_bytes / kCacheLineBytes;
    sr.latency_mode = strategy_is_latency(config.main.strategy);
    sr.counter_deltas = std::move(exec.counter_deltas);
    sr.sync = exec.sync;
    sr.warnings = std::move(exec.warnings);
    if (sr.elapsed_ns.size() != config.iterations) {
      throw Error("backend returned " + std::to_string(sr.elapsed_ns.size()) +
                  " iteration timings, expected " + std::to_string(config.iterations));
    }

    // Sanity pass over the observed read buffer: a stressor scribbling into
    // it would silently skew results.
    const ActivityPlan& main_plan = plan.per_core[config.observed_core];
    if (config.main.strategy == Strategy::read && !main_plan.buffer.data.empty()) {
      if (auto bad = verify_bandwidth_buffer(main_plan.buffer)) {
        sr.warnings.push_back("main buffer corrupted at word " + std::to_string(*bad));
      }
    }

    result.scenarios.push_back(std::move(sr));
    backend.cache_hygiene();
  }

  backend.end_experiment();
  return result;
}

}  // namespace memscope
