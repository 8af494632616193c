#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "memscope/error.hpp"
#include "memscope/sim/engine.hpp"
#include "memscope/sim/model.hpp"
#include "memscope/workload.hpp"

using namespace memscope;
using namespace memscope::sim;
using doctest::Approx;

namespace {

constexpr std::uint64_t kFastBase = 0x100000;
constexpr std::uint64_t kSlowBase = 0x800000;

std::vector<ModuleRange> two_ranges() {
  return {{1, kFastBase, 4ull << 20}, {2, kSlowBase, 4ull << 20}};
}

// 64 KiB 4-way cache (256 sets), fast module 100 ns / mlp 4, slow module
// 400 ns / mlp 2. Small enough that tests finish instantly.
SimSystemModel small_model(std::uint32_t cores = 1) {
  SimSystemModel m;
  m.cores = cores;
  m.cpu_cycles_per_us = 1000;
  m.bus_queue_entries = 8;
  m.core_issue_depth = 8;
  m.cache.size_bytes = 64 << 10;
  m.cache.ways = 4;
  m.cache.hit_latency_ns = 3;
  m.cache.hit_port_slots = 1;
  m.modules = {{1, "fast", 100, 4}, {2, "slow", 400, 2}};
  return m;
}

CoreStream stream_of(std::uint32_t core, Strategy s, std::uint64_t base, std::uint64_t bytes,
                     std::uint64_t iterations, const LatencyChain* chain = nullptr) {
  CoreStream cs;
  cs.core = core;
  cs.role = Role::stress;
  cs.record_iterations = true;
  StreamPhase ph;
  ph.strategy = s;
  ph.base_addr = base;
  ph.bytes = bytes;
  ph.pool_id = base == kFastBase ? 1 : 2;
  ph.iterations = iterations;
  ph.chain = chain;
  cs.phases.push_back(ph);
  return cs;
}

struct Interval {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

// Peak concurrency over half-open [begin, end) intervals: a release at t
// frees its slot to a grant at the same t, matching the engine's hand-off.
std::uint64_t peak_overlap(const std::vector<Interval>& ivals) {
  std::vector<std::pair<std::uint64_t, int>> edges;
  edges.reserve(ivals.size() * 2);
  for (const auto& iv : ivals) {
    edges.push_back({iv.begin, +1});
    edges.push_back({iv.end, -1});
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;  // releases before grants at the same tick
  });
  std::uint64_t level = 0, peak = 0;
  for (const auto& [t, d] : edges) {
    (void)t;
    if (d > 0) {
      ++level;
      peak = std::max(peak, level);
    } else {
      --level;
    }
  }
  return peak;
}

void check_trace_legality(const TransactionTrace& trace, const SimSystemModel& model) {
  std::map<std::uint32_t, std::vector<Interval>> per_module;
  std::vector<Interval> queue;
  std::vector<Interval> hits;
  for (const auto& rec : trace.records) {
    CHECK(rec.complete >= rec.issue);
    if (rec.module != 0) {
      CHECK(rec.service_start >= rec.issue);
      CHECK(rec.complete >= rec.service_start);
      per_module[rec.module].push_back({rec.service_start, rec.complete});
      queue.push_back({rec.issue, rec.complete});
    } else {
      hits.push_back({rec.issue, rec.complete});
    }
  }
  for (const auto& [pool_id, ivals] : per_module) {
    const ModuleModel* mod = model.module_for_pool(pool_id);
    REQUIRE(mod != nullptr);
    CHECK(peak_overlap(ivals) <= mod->mlp_cap);
  }
  if (model.bus_queue_entries != kUnlimitedQueue) {
    CHECK(peak_overlap(queue) <= model.bus_queue_entries);
  }
  CHECK(peak_overlap(hits) <= model.cache.hit_port_slots);
}

}  // namespace

TEST_CASE("identical inputs give identical traces and counters") {
  auto run = [] {
    SimMachine machine(small_model(2), two_ranges(), true);
    const auto chain = make_latency_chain(512, 7);
    std::vector<CoreStream> streams = {
        stream_of(0, Strategy::read, kFastBase, 64 << 10, 3),
        stream_of(1, Strategy::latency, kSlowBase, 512 * 64, 2, &chain),
    };
    machine.run_plain(streams, NcMode::dcadd);
    return std::make_pair(machine.trace().records, machine.counter_values(0));
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.size() == b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) {
    CHECK(a.first[i].line_addr == b.first[i].line_addr);
    CHECK(a.first[i].issue == b.first[i].issue);
    CHECK(a.first[i].complete == b.first[i].complete);
    CHECK(a.first[i].core == b.first[i].core);
    CHECK(a.first[i].hit == b.first[i].hit);
  }
  CHECK(a.second == b.second);
}

TEST_CASE("dependent chain on the miss path costs hit latency plus module latency") {
  // 128 KiB chain over a 64 KiB cache: every revisit distance exceeds the
  // ways, so each access misses and pays 3 + 100 ns, fully serialized.
  auto model = small_model(1);
  const std::uint32_t lines = (128 << 10) / 64;
  const auto chain = make_latency_chain(lines, 11);
  SimMachine machine(model, two_ranges(), false);
  auto stats = machine.run_plain({stream_of(0, Strategy::latency, kFastBase, 128 << 10, 3, &chain)},
                                 NcMode::dcadd);
  REQUIRE(stats.size() == 1);
  const auto& out = stats[0].outcome;
  CHECK(out.line_accesses == 3ull * lines);
  REQUIRE(out.per_iteration_ns.size() == 3);
  for (const auto ns : out.per_iteration_ns) {
    CHECK(ns == lines * 103ull);
  }
}

TEST_CASE("uncached sequential reads reach the module's fan-out bandwidth") {
  auto model = small_model(1);
  model.cache.present = false;
  SimMachine machine(model, two_ranges(), true);
  const std::uint64_t bytes = 256 << 10;
  auto stats = machine.run_plain({stream_of(0, Strategy::read, kFastBase, bytes, 4)},
                                 NcMode::dcadd);
  const auto& out = stats[0].outcome;
  // Steady state: 4 transactions in service at 100 ns each -> 25 ns/line ->
  // 2.56 bytes/ns. Startup skew stays within 5%.
  const double per_line = static_cast<double>(out.elapsed_ns) /
                          static_cast<double>(out.line_accesses);
  CHECK(per_line == Approx(25.0).epsilon(0.05));

  // Little's law on the trace itself: throughput times mean in-service
  // residency equals the sustained server concurrency, the module's cap.
  const auto& recs = machine.trace().records;
  double service_sum = 0;
  for (const auto& r : recs) service_sum += static_cast<double>(r.complete - r.service_start);
  const double residency = service_sum / static_cast<double>(recs.size());
  const double tput = static_cast<double>(out.line_accesses) /
                      static_cast<double>(out.elapsed_ns);
  CHECK(residency * tput == Approx(4.0).epsilon(0.05));
}

TEST_CASE("independent modules with a deep queue do not interfere") {
  auto model = small_model(2);
  model.cache.present = false;
  model.bus_queue_entries = kUnlimitedQueue;

  auto solo = [&](std::uint32_t core, std::uint64_t base) {
    SimMachine machine(model, two_ranges(), false);
    auto streams = std::vector<CoreStream>{stream_of(core, Strategy::read, base, 64 << 10, 3)};
    return machine.run_plain(streams, NcMode::dcadd)[core].outcome.elapsed_ns;
  };
  const auto solo_fast = solo(0, kFastBase);
  const auto solo_slow = solo(1, kSlowBase);

  SimMachine machine(model, two_ranges(), false);
  auto both = machine.run_plain({stream_of(0, Strategy::read, kFastBase, 64 << 10, 3),
                                 stream_of(1, Strategy::read, kSlowBase, 64 << 10, 3)},
                                NcMode::dcadd);
  CHECK(both[0].outcome.elapsed_ns == solo_fast);
  CHECK(both[1].outcome.elapsed_ns == solo_slow);
}

TEST_CASE("traces stay legal under heavy mixed contention") {
  auto model = small_model(4);
  model.bus_queue_entries = 4;
  SimMachine machine(model, two_ranges(), true);
  const auto chain = make_latency_chain(256, 3);
  machine.run_plain(
      {
          stream_of(0, Strategy::read, kFastBase, 128 << 10, 2),
          stream_of(1, Strategy::write, kFastBase + (1 << 20), 128 << 10, 2),
          stream_of(2, Strategy::latency, kSlowBase, 256 * 64, 2, &chain),
          stream_of(3, Strategy::stream_write, kSlowBase + (1 << 20), 64 << 10, 2),
      },
      NcMode::dcadd);
  check_trace_legality(machine.trace(), model);
}

TEST_CASE("sequential reads touch each line exactly once per iteration") {
  auto model = small_model(1);
  SimMachine machine(model, two_ranges(), true);
  const std::uint64_t bytes = 32 << 10;
  machine.run_plain({stream_of(0, Strategy::read, kFastBase, bytes, 1)}, NcMode::dcadd);
  std::set<std::uint64_t> addrs;
  std::uint64_t demand = 0;
  for (const auto& rec : machine.trace().records) {
    if (rec.writeback) continue;
    ++demand;
    addrs.insert(rec.line_addr);
  }
  CHECK(demand == bytes / 64);
  CHECK(addrs.size() == bytes / 64);
}

TEST_CASE("dependent accesses are serialized in the trace") {
  auto model = small_model(1);
  const auto chain = make_latency_chain(128, 5);
  SimMachine machine(model, two_ranges(), true);
  machine.run_plain({stream_of(0, Strategy::latency, kFastBase, 128 * 64, 2, &chain)},
                    NcMode::dcadd);
  const auto& recs = machine.trace().records;
  REQUIRE(recs.size() == 256);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    CHECK(recs[i].issue >= recs[i - 1].complete);
  }
}

TEST_CASE("dcadd non-cacheable strategies never hit") {
  auto model = small_model(1);
  for (Strategy s : {Strategy::nc_read, Strategy::nc_write}) {
    SimMachine machine(model, two_ranges(), true);
    // Tiny buffer that would hit trivially if cached.
    machine.run_plain({stream_of(0, s, kFastBase, 4 << 10, 4)}, NcMode::dcadd);
    std::uint64_t hits = 0;
    for (const auto& rec : machine.trace().records) hits += rec.hit ? 1 : 0;
    CHECK(hits == 0);
  }

  // The chained variant too.
  const auto chain = make_latency_chain(64, 2);
  SimMachine machine(model, two_ranges(), true);
  machine.run_plain({stream_of(0, Strategy::nc_latency, kFastBase, 64 * 64, 3, &chain)},
                    NcMode::dcadd);
  for (const auto& rec : machine.trace().records) CHECK(!rec.hit);
}

TEST_CASE("dcafter lets a warmed first pass hit, then invalidates") {
  auto model = small_model(1);
  const std::uint64_t bytes = 4 << 10;
  const std::uint64_t lines = bytes / 64;

  auto count_hits = [&](NcMode mode) {
    SimMachine machine(model, two_ranges(), true);
    CoreStream cs = stream_of(0, Strategy::read, kFastBase, bytes, 1);
    StreamPhase nc = cs.phases[0];
    nc.strategy = Strategy::nc_read;
    nc.iterations = 2;
    cs.phases.push_back(nc);
    machine.run_plain({cs}, mode);
    std::uint64_t hits = 0;
    for (const auto& rec : machine.trace().records) hits += rec.hit ? 1 : 0;
    return hits;
  };

  // Warm pass misses; the first dcafter sweep hits every line once and
  // leaves nothing behind, so the second sweep misses again.
  CHECK(count_hits(NcMode::dcafter) == lines);
  CHECK(count_hits(NcMode::dcadd) == 0);
}

TEST_CASE("streaming writes never allocate and never read") {
  auto model = small_model(1);
  SimMachine machine(model, two_ranges(), true);
  machine.run_plain({stream_of(0, Strategy::stream_write, kFastBase, 16 << 10, 3)},
                    NcMode::dcadd);
  const auto ctr = machine.counter_values(0);
  CHECK(ctr.at("l2d_cache") == 0);
  CHECK(ctr.at("l2d_cache_refill") == 0);
  CHECK(ctr.at("bus_read") == 0);
  CHECK(ctr.at("bus_write") == 3 * (16 << 10) / 64);
  for (const auto& rec : machine.trace().records) {
    CHECK(rec.kind == TxKind::write);
    CHECK(!rec.hit);
    CHECK(!rec.writeback);
  }
}

TEST_CASE("write misses fetch lines and evict dirty victims as write-backs") {
  auto model = small_model(1);
  // 128 KiB of stores through a 64 KiB cache: every access misses, every
  // install eventually evicts a dirty line.
  SimMachine machine(model, two_ranges(), true);
  machine.run_plain({stream_of(0, Strategy::write, kFastBase, 128 << 10, 2)}, NcMode::dcadd);
  const std::uint64_t lines = (128 << 10) / 64;

  std::uint64_t demand_reads = 0, writebacks = 0;
  for (const auto& rec : machine.trace().records) {
    if (rec.writeback) {
      ++writebacks;
      CHECK(rec.kind == TxKind::write);
    } else if (rec.module != 0) {
      ++demand_reads;
      CHECK(rec.kind == TxKind::read);
    }
  }
  // WAWB: one allocate-read per miss.
  const auto ctr = machine.counter_values(0);
  CHECK(demand_reads == ctr.at("l2d_cache_refill"));
  CHECK(demand_reads == 2 * lines);
  // Both iterations' installs must wash back out; the cache only retains
  // its capacity worth of dirty lines at the end.
  CHECK(writebacks == 2 * lines - (64 << 10) / 64);
  CHECK(ctr.at("bus_write") == writebacks);
}

TEST_CASE("cache partitions confine a core to its band") {
  // Core 0 is squeezed into a single set: a 32-line buffer can never be
  // cache-resident, so every pass misses. Unpartitioned, the same buffer
  // spreads over 32 sets and hits after the first pass.
  auto run_refills = [](bool partitioned) {
    auto model = small_model(1);
    if (partitioned) {
      model.cache.partition_fraction[0] = 1.0 / 256.0;  // exactly one set
    }
    SimMachine machine(model, two_ranges(), false);
    machine.run_plain({stream_of(0, Strategy::read, kFastBase, 32 * 64, 4)}, NcMode::dcadd);
    return machine.counter_values(0).at("l2d_cache_refill");
  };
  CHECK(run_refills(false) == 32);       // cold pass only
  CHECK(run_refills(true) == 4ull * 32); // every pass
}

TEST_CASE("scenario runs order the synchronization protocol correctly") {
  auto model = small_model(4);
  SimMachine machine(model, two_ranges(), true);

  std::vector<CoreStream> streams;
  CoreStream main = stream_of(0, Strategy::read, kFastBase, 16 << 10, 3);
  main.role = Role::main;
  streams.push_back(main);
  for (std::uint32_t c = 1; c < 4; ++c) {
    CoreStream worker = stream_of(c, Strategy::write, kFastBase + c * (64 << 10), 16 << 10, 0);
    worker.phases[0].iterations = 0;  // run until stopped
    worker.start_delay_ns = 1000 * c; // staggered arrivals
    worker.stop_notice_delay_ns = 500 * c;
    streams.push_back(worker);
  }

  const auto out = machine.run_scenario(streams, 0, 1, NcMode::dcadd);
  const auto& sync = out.sync;
  CHECK(sync.measure_end > sync.measure_start);
  CHECK(sync.stop_raised > sync.measure_end);
  REQUIRE(sync.workers.size() == 3);
  for (const auto& w : sync.workers) {
    CHECK(w.started <= sync.measure_start);
    CHECK(w.finished >= sync.stop_raised);
  }
  // The main stream's measured window is bounded by the worker windows on
  // both sides; workers keep running until stop acknowledgement.
  CHECK(out.per_core[0].outcome.line_accesses == 3 * (16 << 10) / 64);
  check_trace_legality(machine.trace(), model);
}

TEST_CASE("scenarios drain fully before the next one starts") {
  auto model = small_model(2);
  SimMachine machine(model, two_ranges(), true);

  auto run_once = [&](std::uint32_t tag) {
    std::vector<CoreStream> streams;
    CoreStream main = stream_of(0, Strategy::read, kFastBase, 8 << 10, 2);
    main.role = Role::main;
    CoreStream worker = stream_of(1, Strategy::write, kSlowBase, 8 << 10, 0);
    worker.phases[0].iterations = 0;
    streams = {main, worker};
    machine.run_scenario(streams, 0, tag, NcMode::dcadd);
  };
  run_once(0);
  run_once(1);

  std::uint32_t last_tag = 0;
  for (const auto& rec : machine.trace().records) {
    CHECK(rec.scenario >= last_tag);
    last_tag = rec.scenario;
  }
}

TEST_CASE("streams outside every pool are rejected") {
  SimMachine machine(small_model(1), two_ranges(), false);
  CHECK_THROWS_AS(
      machine.run_plain({stream_of(0, Strategy::read, 0xff000000, 4 << 10, 1)}, NcMode::dcadd),
      Error);
}
