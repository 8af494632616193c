#include "memscope/native/backend.hpp"

#include <pthread.h>
#include <sched.h>
#include <time.h>
#include <unistd.h>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "memscope/coordinator.hpp"
#include "memscope/error.hpp"

namespace memscope::native {

std::uint64_t monotonic_ns() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::uint64_t>(ts.tv_sec) * 1'000'000'000ull +
         static_cast<std::uint64_t>(ts.tv_nsec);
}

namespace {

void sleep_ns(std::uint64_t ns) {
  if (ns == 0) return;
  timespec req{static_cast<time_t>(ns / 1'000'000'000ull),
               static_cast<long>(ns % 1'000'000'000ull)};
  while (nanosleep(&req, &req) == -1 && errno == EINTR) {
  }
}

// Sink that keeps the optimizer from dropping measurement kernels.
volatile std::uint64_t g_sink;

std::uint64_t read_pass(const std::byte* p, std::uint64_t len) {
  const auto* w = reinterpret_cast<const std::uint64_t*>(p);
  std::uint64_t acc = 0;
  for (std::uint64_t i = 0, n = len / sizeof(std::uint64_t); i < n; ++i) acc += w[i];
  return acc;
}

// Stores the same identity pattern init_bandwidth_buffer lays down, so a
// write-strategy buffer stays verifiable after the run.
void write_pass(std::byte* p, std::uint64_t len) {
  auto* w = reinterpret_cast<std::uint32_t*>(p);
  for (std::uint64_t i = 0, n = len / sizeof(std::uint32_t); i < n; ++i)
    w[i] = static_cast<std::uint32_t>(i);
}

#if defined(__SSE2__)
void stream_pass(std::byte* p, std::uint64_t len) {
  auto* dst = reinterpret_cast<__m128i*>(p);
  __m128i v = _mm_setr_epi32(0, 1, 2, 3);
  const __m128i inc = _mm_set1_epi32(4);
  for (std::uint64_t i = 0, n = len / sizeof(__m128i); i < n; ++i) {
    _mm_stream_si128(dst + i, v);
    v = _mm_add_epi32(v, inc);
  }
  _mm_sfence();
}
constexpr bool kHaveStream = true;
#else
void stream_pass(std::byte* p, std::uint64_t len) { write_pass(p, len); }
constexpr bool kHaveStream = false;
#endif

std::uint64_t chase_pass(const std::byte* p, std::uint64_t accesses, std::uint64_t start) {
  std::uint64_t idx = start;
  for (std::uint64_t i = 0; i < accesses; ++i) {
    idx = *reinterpret_cast<const volatile std::uint64_t*>(p + idx * kCacheLineBytes);
  }
  return idx;
}

std::uint64_t llc_size_guess(std::uint64_t hint) {
  if (hint) return hint;
#if defined(_SC_LEVEL3_CACHE_SIZE)
  long l3 = sysconf(_SC_LEVEL3_CACHE_SIZE);
  if (l3 > 0) return static_cast<std::uint64_t>(l3);
#endif
#if defined(_SC_LEVEL2_CACHE_SIZE)
  long l2 = sysconf(_SC_LEVEL2_CACHE_SIZE);
  if (l2 > 0) return static_cast<std::uint64_t>(l2);
#endif
  return 0;
}

// User space has no cache-maintenance instructions, so the non-cacheable
// variants degrade to their plain counterparts and say so.
Strategy resolve_strategy(Strategy s, std::uint64_t buffer_len, std::uint64_t llc,
                          std::vector<std::string>& warnings) {
  switch (s) {
    case Strategy::nc_read:
    case Strategy::nc_write:
    case Strategy::nc_latency: {
      Strategy eff = s == Strategy::nc_read    ? Strategy::read
                     : s == Strategy::nc_write ? Strategy::write
                                               : Strategy::latency;
      std::string w = "strategy '" + std::string(1, strategy_code(s)) +
                      "': cache maintenance is unavailable in user space, running as '" +
                      std::string(1, strategy_code(eff)) + "'";
      if (llc == 0) {
        w += " (LLC size unknown)";
      } else if (buffer_len <= llc) {
        w += "; buffer fits the LLC (" + std::to_string(llc) +
             " bytes), accesses will mostly hit";
      }
      warnings.push_back(std::move(w));
      return eff;
    }
    case Strategy::stream_write:
      if (!kHaveStream)
        warnings.push_back(
            "strategy 'y': no non-temporal store support in this build, using plain stores");
      return s;
    default:
      return s;
  }
}

struct PassRunner {
  Strategy effective = Strategy::idle;
  std::byte* data = nullptr;
  std::uint64_t len = 0;
  const LatencyChain* chain = nullptr;

  void one_pass() const {
    switch (effective) {
      case Strategy::read:
        g_sink = read_pass(data, len);
        break;
      case Strategy::write:
        write_pass(data, len);
        break;
      case Strategy::latency:
        g_sink = chase_pass(data, chain->lines, chain->start);
        break;
      case Strategy::stream_write:
        stream_pass(data, len);
        break;
      default:
        break;  // idle: nothing
    }
  }
};

PassRunner make_runner(Strategy requested, const PoolBuffer& buffer, const LatencyChain* chain,
                       std::uint64_t llc, std::vector<std::string>& warnings) {
  if (buffer.data.empty()) throw Error("native workload needs a buffer with data backing");
  if (buffer.length < kCacheLineBytes) throw Error("workload buffer is smaller than one line");
  PassRunner r;
  r.effective = resolve_strategy(requested, buffer.length, llc, warnings);
  r.data = buffer.data.data();
  r.len = buffer.length;
  r.chain = chain;
  if (strategy_is_latency(r.effective)) {
    if (!chain) throw Error("latency workload needs a chain");
    if (static_cast<std::uint64_t>(chain->lines) * kCacheLineBytes > buffer.length)
      throw Error("chain does not fit the buffer");
  }
  return r;
}

struct AffinityRestore {
  cpu_set_t old{};
  bool valid = false;

  AffinityRestore() {
    valid = pthread_getaffinity_np(pthread_self(), sizeof(old), &old) == 0;
  }
  ~AffinityRestore() {
    if (valid) pthread_setaffinity_np(pthread_self(), sizeof(old), &old);
  }
};

}  // namespace

std::uint32_t online_cores() {
  const long n = sysconf(_SC_NPROCESSORS_ONLN);
  return n < 1 ? 1u : static_cast<std::uint32_t>(n);
}

bool pin_current_thread(std::uint32_t core) {
  if (core >= online_cores())
    throw Error("cannot pin to core " + std::to_string(core) + ": only " +
                std::to_string(online_cores()) + " cores online");
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
}

NativeBackend::NativeBackend(NativeOptions opts) : opts_(opts) {
  cores_ = opts_.cores ? opts_.cores : online_cores();
}

void NativeBackend::cache_hygiene() {
  // A full write+read pass over a scratch buffer large enough to push prior
  // scenario contents out of the LLC.
  std::uint64_t bytes = opts_.hygiene_bytes;
  if (const std::uint64_t llc = llc_size_guess(opts_.llc_size_hint); llc > 0)
    bytes = std::max(bytes, 2 * llc);
  if (hygiene_buf_.size() < bytes) hygiene_buf_.assign(bytes, std::byte{0});
  write_pass(hygiene_buf_.data(), bytes);
  g_sink = read_pass(hygiene_buf_.data(), bytes);
}

WorkloadOutcome NativeBackend::run_workload(const WorkloadRun& run) {
  WorkloadOutcome out;

  if (run.strategy == Strategy::idle) {
    if (!run.stop) throw Error("idle workload needs a stop flag");
    const std::uint64_t t0 = monotonic_ns();
    while (!run.stop->load(std::memory_order_acquire)) {
      sched_yield();
    }
    out.elapsed_ns = monotonic_ns() - t0;
    return out;
  }

  if (run.iterations == 0) throw Error("iterations must be at least 1");
  PassRunner runner = make_runner(run.strategy, run.buffer, run.chain,
                                  llc_size_guess(opts_.llc_size_hint), out.warnings);

  runner.one_pass();  // warm-up, discarded
  out.per_iteration_ns.reserve(run.iterations);
  const std::uint64_t begin = monotonic_ns();
  for (std::uint64_t k = 0; k < run.iterations; ++k) {
    const std::uint64_t t0 = monotonic_ns();
    runner.one_pass();
    out.per_iteration_ns.push_back(monotonic_ns() - t0);
  }
  out.elapsed_ns = monotonic_ns() - begin;

  const std::uint64_t lines = strategy_is_latency(run.strategy)
                                  ? run.chain->lines
                                  : run.buffer.length / kCacheLineBytes;
  out.line_accesses = run.iterations * lines;
  out.bytes_touched = out.line_accesses * kCacheLineBytes;
  return out;
}

ScenarioExecution NativeBackend::run_scenario(const ScenarioPlan& plan) {
  if (plan.per_core.size() != cores_)
    throw Error("scenario plan covers " + std::to_string(plan.per_core.size()) +
                " cores, the backend has " + std::to_string(cores_));
  const std::uint32_t observed = plan.observed_core;
  const std::uint64_t llc = llc_size_guess(opts_.llc_size_hint);

  ScenarioExecution out;
  SyncCell sync(cores_);
  std::mutex warn_mu;
  std::vector<std::string> worker_errors;
  std::vector<std::uint32_t> worker_ids;
  for (std::uint32_t c = 0; c < cores_; ++c) {
    if (c != observed) worker_ids.push_back(c);
  }

  auto note = [&](std::string s) {
    std::lock_guard<std::mutex> lock(warn_mu);
    out.warnings.push_back(std::move(s));
  };
  auto pin_or_note = [&](std::uint32_t core) {
    if (core >= online_cores()) {
      note("core " + std::to_string(core) + " is beyond the online count, running unpinned");
      return;
    }
    if (!pin_current_thread(core))
      note("pinning to core " + std::to_string(core) + " failed, running unpinned");
  };

  std::vector<std::thread> threads;
  threads.reserve(worker_ids.size());
  for (const std::uint32_t c : worker_ids) {
    threads.emplace_back([&, c, &ap = plan.per_core[c]]() {
      try {
        pin_or_note(c);
        sleep_ns(ap.start_delay_ns);
        sync.mark_started(c, monotonic_ns());
        if (ap.role == Role::idle) {
          while (!sync.stop_requested()) {
            // busy occupation of the core, no memory traffic
          }
        } else {
          std::vector<std::string> local_warn;
          PassRunner runner = make_runner(ap.strategy, ap.buffer, ap.chain, llc, local_warn);
          for (auto& w : local_warn) note("core " + std::to_string(c) + ": " + w);
          while (!sync.stop_requested()) {
            runner.one_pass();
          }
        }
        sleep_ns(ap.stop_notice_delay_ns);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(warn_mu);
        worker_errors.push_back("core " + std::to_string(c) + ": " + e.what());
      }
      sync.mark_finished(c, monotonic_ns());
    });
  }

  AffinityRestore restore;
  SyncTimeline& tl = out.sync;
  tl.origin = monotonic_ns();

  try {
    pin_or_note(observed);

    if (auto missing = sync.wait_all_started(worker_ids, monotonic_ns() + plan.stop_timeout_ns)) {
      sync.raise_stop(monotonic_ns());
      for (auto& t : threads) t.join();
      throw Error("timed out waiting for core " + std::to_string(*missing) + " to start");
    }

    const ActivityPlan& main_plan = plan.per_core[observed];
    std::vector<std::string> main_warn;
    PassRunner runner =
        make_runner(main_plan.strategy, main_plan.buffer, main_plan.chain, llc, main_warn);
    for (auto& w : main_warn) note(w);

    runner.one_pass();  // warm-up, not measured

    auto& prov = counters();
    std::map<std::uint32_t, std::map<std::string, std::uint64_t>> before;
    for (std::uint32_t c = 0; c < cores_; ++c) {
      const auto& events = (c == observed) ? plan.counters_main : plan.counters_others;
      if (!events.empty()) before[c] = prov.sample(c, events);
    }

    tl.measure_start = monotonic_ns();
    sync.mark_started(observed, tl.measure_start);
    out.main.per_iteration_ns.reserve(plan.iterations);
    for (std::uint64_t k = 0; k < plan.iterations; ++k) {
      const std::uint64_t t0 = monotonic_ns();
      runner.one_pass();
      out.main.per_iteration_ns.push_back(monotonic_ns() - t0);
    }
    tl.measure_end = monotonic_ns();

    for (auto& [core, sampled] : before) {
      const auto& events = (core == observed) ? plan.counters_main : plan.counters_others;
      auto after = prov.sample(core, events);
      for (const auto& [ev, v0] : sampled) {
        if (auto it = after.find(ev); it != after.end())
          out.counter_deltas[core][ev] = it->second - v0;
      }
    }

    const std::uint64_t lines = strategy_is_latency(main_plan.strategy)
                                    ? main_plan.chain->lines
                                    : main_plan.buffer.length / kCacheLineBytes;
    out.main.line_accesses = plan.iterations * lines;
    out.main.bytes_touched = out.main.line_accesses * kCacheLineBytes;
    out.main.elapsed_ns = tl.measure_end - tl.measure_start;

    auto acks = stop_protocol(sync, worker_ids, plan.stop_timeout_ns);
    tl.stop_raised = sync.stop_raised_at();
    for (const auto& [core, ack] : acks) {
      tl.workers.push_back({core, sync.started_at(core), ack});
    }
  } catch (...) {
    // A worker that never acknowledges cannot be joined safely; detach what
    // remains and surface the failure.
    sync.raise_stop(monotonic_ns());
    for (auto& t : threads) {
      if (t.joinable()) t.detach();
    }
    throw;
  }

  for (auto& t : threads) t.join();
  if (!worker_errors.empty()) {
    std::string msg = "worker failure:";
    for (const auto& e : worker_errors) msg += " " + e;
    throw Error(msg);
  }
  out.main.warnings = out.warnings;
  return out;
}

}  // namespace memscope::native
