#include "memscope/sim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <ostream>
#include <queue>

#include "memscope/error.hpp"

namespace memscope::sim {
namespace {

constexpr std::uint32_t kNone = 0xffffffffu;

enum class EvKind : std::uint8_t {
  port_done,    // a: tx id
  module_done,  // a: tx id
  core_start,   // a: core
  main_start,
  stop_notice,  // a: core
};

struct Ev {
  std::uint64_t time;
  std::uint64_t seq;
  EvKind kind;
  std::uint32_t a;
};

struct EvLater {
  bool operator()(const Ev& x, const Ev& y) const {
    if (x.time != y.time) return x.time > y.time;
    return x.seq > y.seq;
  }
};

enum class PortStage : std::uint8_t {
  lookup,  // normal cache lookup
  probe,   // clean+invalidate pass of a dcadd access; always misses
};

struct Tx {
  std::uint64_t line_addr = 0;
  std::uint64_t issue = 0;
  std::uint64_t service_start = 0;
  std::uint32_t core = 0;
  std::uint32_t module = 0;
  std::uint32_t scenario = 0;
  TxKind kind = TxKind::read;
  PortStage stage = PortStage::lookup;
  bool writeback = false;
  bool install = false;
  bool install_dirty = false;
  bool invalidate_after = false;  // dcafter maintenance on the hit path
  bool spawn_wb_after = false;    // nc-write: emit the write-back once the read lands
  bool counts_slot = false;
  bool release_slot_at_service = false;  // streaming store: posted past the grant
};

// Fixed-capacity server stage (the hit port and each module) with per-core
// FIFO wait lists and a round-robin grant cursor over cores.
// Queues stay shallow (bounded by issue depth and queue entries), so plain
// vectors with front erasure beat node- or block-based containers here.
struct Servers {
  std::uint32_t free_slots = 0;
  std::uint32_t waiters = 0;
  std::uint32_t rr = 0;
  std::vector<std::vector<std::uint32_t>> waiting;

  void init(std::uint32_t slots, std::uint32_t cores) {
    free_slots = slots;
    waiters = 0;
    rr = 0;
    waiting.assign(cores, {});
  }
  void push(std::uint32_t core, std::uint32_t tx) {
    waiting[core].push_back(tx);
    ++waiters;
  }
  // Next tx under round-robin-over-cores; ties go to the lower core id by
  // construction of the scan. Returns kNone when nobody waits.
  std::uint32_t pop_rr() {
    if (waiters == 0) return kNone;
    const auto n = static_cast<std::uint32_t>(waiting.size());
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t c = (rr + i) % n;
      if (!waiting[c].empty()) {
        const std::uint32_t tx = waiting[c].front();
        waiting[c].erase(waiting[c].begin());
        --waiters;
        rr = (c + 1) % n;
        return tx;
      }
    }
    return kNone;
  }
};

struct CacheLine {
  std::uint64_t addr = 0;
  std::uint64_t stamp = 0;
  bool valid = false;
  bool dirty = false;
};

struct PerCoreCounters {
  std::uint64_t mem_access = 0;
  std::uint64_t l2d_cache = 0;
  std::uint64_t l2d_cache_refill = 0;
  std::uint64_t bus_read = 0;
  std::uint64_t bus_write = 0;
};

struct CoreState {
  const CoreStream* stream = nullptr;
  bool is_main = false;
  std::size_t phase = 0;
  std::uint64_t iter = 0;
  std::uint64_t issued_in_iter = 0;
  std::uint64_t completed_in_iter = 0;
  std::uint32_t chain_pos = 0;
  std::uint32_t outstanding = 0;  // issue slots held
  std::uint32_t live = 0;         // demand txes in flight (drain condition)
  bool started = false;
  bool stop_seen = false;
  bool finished = false;
  std::uint64_t started_at = 0;
  std::uint64_t finished_at = 0;
  std::uint64_t iter_start = 0;
  WorkloadOutcome out;
};

}  // namespace

struct SimMachine::Impl {
  SimSystemModel model;
  std::vector<ModuleRange> ranges;
  bool trace_on;

  std::uint64_t now = 0;
  std::uint64_t seq = 0;
  std::priority_queue<Ev, std::vector<Ev>, EvLater> heap;

  std::vector<Tx> txs;
  std::vector<std::uint32_t> free_txs;

  // Resources.
  Servers port;
  std::vector<Servers> module_srv;          // parallel to model.modules
  std::uint32_t bus_free = 0;               // meaningless when unlimited
  std::uint32_t bus_waiters = 0;
  std::uint32_t bus_rr = 0;
  std::vector<std::vector<std::uint32_t>> bus_waiting;

  // Cache.
  std::vector<CacheLine> cache;
  std::uint64_t lru_stamp = 0;
  struct Band {
    std::uint32_t first = 0;
    std::uint32_t count = 1;
    std::uint32_t mask = 0;  // count-1 when count is a power of two, else 0
  };
  std::vector<Band> bands;
  std::uint32_t line_shift = 6;

  // pool id -> index into model.modules, kNone for pools the model skips.
  std::vector<std::uint32_t> pool_to_module;

  std::vector<PerCoreCounters> ctr;
  TransactionTrace trace_data;

  // Per-run state.
  std::vector<CoreState> cores;
  bool protocol_mode = false;
  std::uint32_t observed = 0;
  std::uint32_t scenario_tag = 0;
  NcMode nc_mode = NcMode::dcadd;
  std::uint32_t unfinished = 0;
  SyncTimeline sync;
  CounterSnapshot snap_before, snap_after;

  explicit Impl(SimSystemModel m, std::vector<ModuleRange> r, bool rec)
      : model(std::move(m)), ranges(std::move(r)), trace_on(rec) {
    if (model.cores == 0) throw Error("simulated machine needs at least one core");
    port.init(model.cache.hit_port_slots, model.cores);
    module_srv.resize(model.modules.size());
    for (std::size_t i = 0; i < model.modules.size(); ++i) {
      module_srv[i].init(model.modules[i].mlp_cap, model.cores);
    }
    bus_free = model.bus_queue_entries;
    bus_waiting.assign(model.cores, {});
    ctr.assign(model.cores, {});
    if (model.cache.present) {
      const std::uint64_t lb = model.cache.line_bytes;
      if (lb == 0 || (lb & (lb - 1)) != 0) {
        throw Error("cache line size must be a power of two, got " + std::to_string(lb));
      }
      line_shift = 0;
      while ((1ull << line_shift) != lb) ++line_shift;
      cache.assign(static_cast<std::size_t>(model.cache.sets()) * model.cache.ways, {});
      init_bands();
    }
    for (const auto& mod : model.modules) {
      if (mod.pool_id >= pool_to_module.size()) pool_to_module.resize(mod.pool_id + 1, kNone);
      pool_to_module[mod.pool_id] =
          static_cast<std::uint32_t>(&mod - model.modules.data());
    }
  }

  void init_bands() {
    const std::uint32_t sets = model.cache.sets();
    bands.assign(model.cores, {0, sets});
    for (std::uint32_t c = 0; c < model.cores; ++c) {
      auto it = model.cache.partition_fraction.find(c);
      if (it == model.cache.partition_fraction.end()) continue;
      double base = 0.0;
      if (auto bit = model.cache.partition_base.find(c); bit != model.cache.partition_base.end())
        base = bit->second;
      auto first = static_cast<std::uint32_t>(base * sets);
      auto count = static_cast<std::uint32_t>(it->second * sets);
      if (count == 0) count = 1;
      if (first >= sets) first = sets - 1;
      if (first + count > sets) count = sets - first;
      bands[c] = {first, count, 0};
    }
    for (auto& b : bands) {
      if ((b.count & (b.count - 1)) == 0) b.mask = b.count - 1;
    }
  }

  // ---- small helpers ------------------------------------------------------

  void schedule(std::uint64_t t, EvKind k, std::uint32_t a) { heap.push({t, seq++, k, a}); }

  std::uint32_t alloc_tx() {
    if (!free_txs.empty()) {
      const std::uint32_t id = free_txs.back();
      free_txs.pop_back();
      txs[id] = Tx{};
      return id;
    }
    txs.emplace_back();
    return static_cast<std::uint32_t>(txs.size() - 1);
  }
  void free_tx(std::uint32_t id) { free_txs.push_back(id); }

  std::uint32_t module_of(std::uint64_t addr) const {
    for (const auto& r : ranges) {
      if (addr >= r.base && addr < r.base + r.size) return r.pool_id;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(addr));
    throw Error(std::string("simulated access at ") + buf + " falls outside every pool");
  }

  std::uint32_t module_index(std::uint32_t pool_id) const {
    if (pool_id < pool_to_module.size() && pool_to_module[pool_id] != kNone) {
      return pool_to_module[pool_id];
    }
    throw Error("no module model for pool " + std::to_string(pool_id));
  }

  std::uint64_t cycles_at(std::uint64_t t) const {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(t) * model.cpu_cycles_per_us) / 1000u);
  }

  std::map<std::string, std::uint64_t> counter_map(std::uint32_t core) const {
    const auto& c = ctr[core];
    return {
        {"cpu_cycles", cycles_at(now)},
        {"mem_access", c.mem_access},
        {"l2d_cache", c.l2d_cache},
        {"l2d_cache_refill", c.l2d_cache_refill},
        {"bus_read", c.bus_read},
        {"bus_write", c.bus_write},
    };
  }

  CounterSnapshot snapshot() const {
    CounterSnapshot s;
    for (std::uint32_t c = 0; c < model.cores; ++c) s[c] = counter_map(c);
    return s;
  }

  void sync_event(SyncEvent::Kind k, std::uint32_t core) {
    if (trace_on) trace_data.sync.push_back({k, core, scenario_tag, now});
  }

  // ---- cache --------------------------------------------------------------

  std::size_t set_index(std::uint32_t core, std::uint64_t line_addr) const {
    const auto& b = bands[core];
    const std::uint64_t line_no = line_addr >> line_shift;
    const std::uint64_t slot = b.mask != 0 ? (line_no & b.mask) : (line_no % b.count);
    return b.first + static_cast<std::size_t>(slot);
  }

  CacheLine* cache_find(std::uint32_t core, std::uint64_t line_addr) {
    const std::uint64_t tag = line_addr & ~(model.cache.line_bytes - 1);
    CacheLine* set = &cache[set_index(core, line_addr) * model.cache.ways];
    for (std::uint32_t w = 0; w < model.cache.ways; ++w) {
      if (set[w].valid && set[w].addr == tag) return &set[w];
    }
    return nullptr;
  }

  struct Evicted {
    bool valid = false;
    bool dirty = false;
    std::uint64_t addr = 0;
  };

  Evicted cache_install(std::uint32_t core, std::uint64_t line_addr, bool dirty) {
    const std::uint64_t tag = line_addr & ~(model.cache.line_bytes - 1);
    CacheLine* set = &cache[set_index(core, line_addr) * model.cache.ways];
    CacheLine* slot = nullptr;
    for (std::uint32_t w = 0; w < model.cache.ways; ++w) {
      if (!set[w].valid) {
        slot = &set[w];
        break;
      }
    }
    Evicted ev;
    if (!slot) {
      slot = set;
      for (std::uint32_t w = 1; w < model.cache.ways; ++w) {
        if (set[w].stamp < slot->stamp) slot = &set[w];
      }
      ev = {true, slot->dirty, slot->addr};
    }
    *slot = {tag, ++lru_stamp, true, dirty};
    return ev;
  }

  // ---- resource stages ----------------------------------------------------

  void start_port_service(std::uint32_t txid) {
    Tx& tx = txs[txid];
    tx.issue = now;  // port grant; overwritten by the bus grant on a miss
    tx.service_start = now;
    schedule(now + model.cache.hit_latency_ns, EvKind::port_done, txid);
  }

  void request_port(std::uint32_t txid) {
    if (port.free_slots > 0) {
      --port.free_slots;
      start_port_service(txid);
    } else {
      port.push(txs[txid].core, txid);
    }
  }

  void release_port() {
    const std::uint32_t next = port.pop_rr();
    if (next != kNone) {
      start_port_service(next);
    } else {
      ++port.free_slots;
    }
  }

  bool bus_unlimited() const { return model.bus_queue_entries == kUnlimitedQueue; }

  void request_bus(std::uint32_t txid) {
    Tx& tx = txs[txid];
    if (bus_unlimited() || bus_free > 0) {
      if (!bus_unlimited()) --bus_free;
      tx.issue = now;
      request_module(txid);
    } else {
      bus_waiting[tx.core].push_back(txid);
      ++bus_waiters;
    }
  }

  // Grant order: round-robin over cores; within one core the lowest-numbered
  // module goes first, FIFO among equals.
  std::uint32_t bus_pop() {
    if (bus_waiters == 0) return kNone;
    const std::uint32_t n = model.cores;
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t c = (bus_rr + i) % n;
      auto& q = bus_waiting[c];
      if (q.empty()) continue;
      std::size_t best = 0;
      for (std::size_t j = 1; j < q.size(); ++j) {
        if (txs[q[j]].module < txs[q[best]].module) best = j;
      }
      const std::uint32_t txid = q[static_cast<std::ptrdiff_t>(best)];
      q.erase(q.begin() + static_cast<std::ptrdiff_t>(best));
      --bus_waiters;
      bus_rr = (c + 1) % n;
      return txid;
    }
    return kNone;
  }

  void release_bus() {
    if (bus_unlimited()) return;
    const std::uint32_t next = bus_pop();
    if (next != kNone) {
      txs[next].issue = now;
      request_module(next);
    } else {
      ++bus_free;
    }
  }

  void start_module_service(std::uint32_t txid, std::uint32_t mi) {
    Tx& tx = txs[txid];
    tx.service_start = now;
    if (tx.release_slot_at_service && tx.counts_slot) {
      tx.counts_slot = false;
      CoreState& cs = cores[tx.core];
      --cs.outstanding;
      pump(tx.core);
    }
    schedule(now + model.modules[mi].latency_ns, EvKind::module_done, txid);
  }

  void request_module(std::uint32_t txid) {
    const std::uint32_t mi = module_index(txs[txid].module);
    Servers& srv = module_srv[mi];
    if (srv.free_slots > 0) {
      --srv.free_slots;
      start_module_service(txid, mi);
    } else {
      srv.push(txs[txid].core, txid);
    }
  }

  // ---- demand access routing ----------------------------------------------

  void spawn_writeback(std::uint32_t core, std::uint64_t line_addr) {
    const std::uint32_t id = alloc_tx();
    Tx& tx = txs[id];
    tx.core = core;
    tx.line_addr = line_addr;
    tx.kind = TxKind::write;
    tx.writeback = true;
    tx.module = module_of(line_addr);
    tx.scenario = scenario_tag;
    request_bus(id);
  }

  void record_tx(const Tx& tx, bool hit, std::uint64_t complete) {
    if (!trace_on) return;
    trace_data.records.push_back({tx.line_addr, tx.issue, tx.service_start, complete, tx.core,
                                  hit ? 0 : tx.module, tx.scenario, tx.kind, hit, tx.writeback});
  }

  void issue_access(std::uint32_t core, CoreState& cs, const StreamPhase& ph) {
    const bool dep = strategy_is_latency(ph.strategy);
    const std::uint64_t line_index = dep ? cs.chain_pos : cs.issued_in_iter;
    const std::uint64_t addr = ph.base_addr + line_index * kCacheLineBytes;
    ++cs.issued_in_iter;

    const std::uint32_t id = alloc_tx();
    Tx& tx = txs[id];
    tx.core = core;
    tx.line_addr = addr;
    tx.scenario = scenario_tag;
    tx.counts_slot = true;
    ++cs.outstanding;
    ++cs.live;
    ++ctr[core].mem_access;

    if (ph.strategy == Strategy::stream_write) {
      // No-allocate streaming store: skips the cache entirely, posted once a
      // module server accepts it.
      tx.kind = TxKind::write;
      tx.module = module_of(addr);
      tx.release_slot_at_service = true;
      request_bus(id);
      return;
    }

    if (!model.cache.present) {
      tx.kind = strategy_is_store(ph.strategy) ? TxKind::write : TxKind::read;
      tx.module = module_of(addr);
      request_bus(id);
      return;
    }

    tx.kind = strategy_is_store(ph.strategy) ? TxKind::write : TxKind::read;
    tx.stage = (strategy_is_noncacheable(ph.strategy) && nc_mode == NcMode::dcadd)
                   ? PortStage::probe
                   : PortStage::lookup;
    if (strategy_is_noncacheable(ph.strategy) && nc_mode == NcMode::dcafter)
      tx.invalidate_after = true;
    if (ph.strategy == Strategy::write) {
      tx.install = true;
      tx.install_dirty = true;
    } else if (ph.strategy == Strategy::read || ph.strategy == Strategy::latency) {
      tx.install = true;
    }
    if (ph.strategy == Strategy::nc_write) tx.spawn_wb_after = true;
    request_port(id);
  }

  void on_port_done(std::uint32_t txid) {
    release_port();
    Tx& tx = txs[txid];
    ++ctr[tx.core].l2d_cache;

    if (tx.stage == PortStage::probe) {
      // Clean+invalidate before the access: after this pass the line cannot
      // be present, so the access below never hits. The transient allocation
      // a real linefill would make is collapsed away; traffic is identical.
      if (CacheLine* line = cache_find(tx.core, tx.line_addr)) {
        const bool dirty = line->dirty;
        line->valid = false;
        if (dirty) spawn_writeback(tx.core, tx.line_addr);
      }
      ++ctr[tx.core].l2d_cache_refill;
      tx.module = module_of(tx.line_addr);
      tx.kind = TxKind::read;  // allocate-read; nc-write emits its WB after
      request_bus(txid);
      return;
    }

    if (CacheLine* line = cache_find(tx.core, tx.line_addr)) {
      line->stamp = ++lru_stamp;
      if (tx.kind == TxKind::write) line->dirty = true;
      if (tx.invalidate_after) {
        const bool dirty = line->dirty;
        line->valid = false;
        if (dirty) spawn_writeback(tx.core, tx.line_addr);
      }
      record_tx(tx, true, now);
      complete_access(txid, true);
      return;
    }

    // Miss: fetch through the shared queue. Write-allocate means even store
    // misses fetch the line first; installation happens when the module
    // transaction lands, and dirty data leaves via write-backs only.
    ++ctr[tx.core].l2d_cache_refill;
    tx.module = module_of(tx.line_addr);
    tx.kind = TxKind::read;
    request_bus(txid);
  }

  void on_module_done(std::uint32_t txid) {
    Tx& tx = txs[txid];
    if (tx.kind == TxKind::read) {
      ++ctr[tx.core].bus_read;
    } else {
      ++ctr[tx.core].bus_write;
    }

    // Free the server, hand it to the next waiter of this module, then
    // release the queue entry (grant order keeps entry holders ahead of new
    // arrivals, which is what makes the queue a throttle).
    const std::uint32_t mi = module_index(tx.module);
    Servers& srv = module_srv[mi];
    const std::uint32_t next = srv.pop_rr();
    if (next != kNone) {
      start_module_service(next, mi);
    } else {
      ++srv.free_slots;
    }
    release_bus();

    if (tx.writeback) {
      record_tx(tx, false, now);
      free_tx(txid);
      return;
    }

    if (tx.install && !tx.invalidate_after) {
      const Evicted ev = cache_install(tx.core, tx.line_addr, tx.install_dirty);
      if (ev.valid && ev.dirty) spawn_writeback(tx.core, ev.addr);
    }
    if (tx.spawn_wb_after) spawn_writeback(tx.core, tx.line_addr);

    record_tx(tx, false, now);
    complete_access(txid, false);
  }

  void complete_access(std::uint32_t txid, bool /*hit*/) {
    Tx& tx = txs[txid];
    CoreState& cs = cores[tx.core];
    if (tx.counts_slot) --cs.outstanding;
    --cs.live;
    ++cs.completed_in_iter;
    cs.out.bytes_touched += kCacheLineBytes;
    ++cs.out.line_accesses;

    const StreamPhase& ph = cs.stream->phases[cs.phase];
    if (strategy_is_latency(ph.strategy)) cs.chain_pos = ph.chain->next[cs.chain_pos];

    const std::uint32_t core = tx.core;
    free_tx(txid);
    pump(core);
  }

  // ---- core progression ----------------------------------------------------

  void enter_phase(CoreState& cs) {
    cs.iter = 0;
    cs.issued_in_iter = 0;
    cs.completed_in_iter = 0;
    cs.iter_start = now;
    if (cs.phase < cs.stream->phases.size()) {
      const StreamPhase& ph = cs.stream->phases[cs.phase];
      if (ph.chain) cs.chain_pos = ph.chain->start;
    }
  }

  void finish_core(std::uint32_t core) {
    CoreState& cs = cores[core];
    cs.finished = true;
    cs.finished_at = now;
    cs.out.elapsed_ns = cs.finished_at - cs.started_at;
    --unfinished;
    sync_event(SyncEvent::Kind::finished, core);

    if (protocol_mode && cs.is_main) {
      sync.measure_end = now;
      snap_after = snapshot();
      sync_event(SyncEvent::Kind::measure_end, core);
      // Stop goes out strictly after the measured window closes.
      sync.stop_raised = now + 1;
      sync_event(SyncEvent::Kind::stop_raised, core);
      for (std::uint32_t c = 0; c < model.cores; ++c) {
        if (c == observed || cores[c].stream == nullptr) continue;
        schedule(sync.stop_raised + cores[c].stream->stop_notice_delay_ns, EvKind::stop_notice, c);
      }
    }
  }

  void pump(std::uint32_t core) {
    CoreState& cs = cores[core];
    if (!cs.started || cs.finished) return;

    for (;;) {
      if (cs.phase >= cs.stream->phases.size()) {
        // Stream exhausted. Workers under the protocol hold position until
        // stop arrives; plain-mode idle streams wait out their duration.
        if (cs.live != 0) return;
        const bool waits_for_stop =
            (protocol_mode && !cs.is_main) ||
            (!protocol_mode && cs.stream->phases.empty() && cs.stream->idle_duration_ns > 0);
        if (waits_for_stop && !cs.stop_seen) return;
        finish_core(core);
        return;
      }
      const StreamPhase& ph = cs.stream->phases[cs.phase];
      if (ph.strategy == Strategy::idle) return;  // event-driven only

      // Stop is checked at every issue decision, mid-iteration included.
      if (cs.stop_seen && !cs.is_main) {
        if (cs.live == 0) finish_core(core);
        return;
      }

      const std::uint64_t lines = ph.bytes / kCacheLineBytes;
      if (cs.issued_in_iter == lines) {
        if (cs.completed_in_iter < lines) return;  // drain at the boundary
        ++cs.iter;
        if (cs.stream->record_iterations)
          cs.out.per_iteration_ns.push_back(now - cs.iter_start);
        cs.issued_in_iter = 0;
        cs.completed_in_iter = 0;
        cs.iter_start = now;
        if (ph.iterations != 0 && cs.iter == ph.iterations) {
          ++cs.phase;
          enter_phase(cs);
        }
        continue;
      }

      const bool dep = strategy_is_latency(ph.strategy);
      const std::uint32_t limit = dep ? 1 : model.core_issue_depth;
      if (cs.outstanding >= limit) return;
      issue_access(core, cs, ph);
    }
  }

  // ---- run orchestration ---------------------------------------------------

  void setup_run(const std::vector<CoreStream>& streams, bool protocol, std::uint32_t observed_core,
                 std::uint32_t tag, NcMode mode) {
    protocol_mode = protocol;
    observed = observed_core;
    scenario_tag = tag;
    nc_mode = mode;
    sync = {};
    sync.origin = now;
    snap_before.clear();
    snap_after.clear();

    cores.assign(model.cores, {});
    for (const auto& s : streams) {
      if (s.core >= model.cores)
        throw Error("stream for core " + std::to_string(s.core) + " but model has " +
                    std::to_string(model.cores) + " cores");
      if (cores[s.core].stream != nullptr)
        throw Error("two streams assigned to core " + std::to_string(s.core));
      cores[s.core].stream = &s;
      cores[s.core].is_main = protocol && s.core == observed_core;
    }
    unfinished = 0;
    for (auto& cs : cores) {
      if (cs.stream) ++unfinished;
    }
    if (unfinished == 0) throw Error("no streams to run");
  }

  void drain_events() {
    while (!heap.empty()) {
      const Ev ev = heap.top();
      heap.pop();
      assert(ev.time >= now);
      now = ev.time;
      switch (ev.kind) {
        case EvKind::port_done:
          on_port_done(ev.a);
          break;
        case EvKind::module_done:
          on_module_done(ev.a);
          break;
        case EvKind::core_start: {
          CoreState& cs = cores[ev.a];
          cs.started = true;
          cs.started_at = now;
          enter_phase(cs);
          sync_event(SyncEvent::Kind::started, ev.a);
          pump(ev.a);
          break;
        }
        case EvKind::main_start: {
          CoreState& cs = cores[observed];
          cs.started = true;
          cs.started_at = now;
          enter_phase(cs);
          sync.measure_start = now;
          snap_before = snapshot();
          sync_event(SyncEvent::Kind::measure_start, observed);
          pump(observed);
          break;
        }
        case EvKind::stop_notice: {
          CoreState& cs = cores[ev.a];
          if (!cs.stream || cs.finished) break;
          cs.stop_seen = true;
          sync_event(SyncEvent::Kind::stop_noticed, ev.a);
          if (cs.live == 0) finish_core(ev.a);
          break;
        }
      }
    }
    if (unfinished != 0) throw Error("simulation stalled with cores still running");
  }

  ScenarioRunOutput run_scenario(const std::vector<CoreStream>& streams,
                                 std::uint32_t observed_core, std::uint32_t tag, NcMode mode) {
    setup_run(streams, true, observed_core, tag, mode);

    std::uint64_t latest_worker_start = now;
    for (const auto& s : streams) {
      if (s.core == observed_core) continue;
      const std::uint64_t at = now + s.start_delay_ns;
      latest_worker_start = std::max(latest_worker_start, at);
      schedule(at, EvKind::core_start, s.core);
    }
    // The main stream begins once every worker reports started; with the
    // delays known upfront that instant is their maximum. Scheduling it after
    // the worker events keeps the causal order on ties.
    schedule(latest_worker_start, EvKind::main_start, 0);

    drain_events();

    ScenarioRunOutput out;
    out.per_core.resize(model.cores);
    for (std::uint32_t c = 0; c < model.cores; ++c) {
      if (!cores[c].stream) continue;
      out.per_core[c] = {cores[c].out, cores[c].started_at, cores[c].finished_at};
      if (c != observed_core)
        sync.workers.push_back({c, cores[c].started_at, cores[c].finished_at});
    }
    out.sync = sync;
    out.counters_before = snap_before;
    out.counters_after = snap_after;
    return out;
  }

  std::vector<CoreRunStats> run_plain(const std::vector<CoreStream>& streams, NcMode mode) {
    setup_run(streams, false, 0, scenario_tag + 1, mode);
    for (const auto& s : streams) {
      schedule(now + s.start_delay_ns, EvKind::core_start, s.core);
      if (s.phases.empty() || s.phases.front().strategy == Strategy::idle) {
        // Plain-mode idle runs for a fixed virtual duration.
        schedule(now + s.start_delay_ns + s.idle_duration_ns, EvKind::stop_notice, s.core);
      }
    }
    drain_events();

    std::vector<CoreRunStats> out(model.cores);
    for (std::uint32_t c = 0; c < model.cores; ++c) {
      if (!cores[c].stream) continue;
      out[c] = {cores[c].out, cores[c].started_at, cores[c].finished_at};
    }
    return out;
  }
};

SimMachine::SimMachine(SimSystemModel model, std::vector<ModuleRange> ranges, bool record_trace)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(ranges), record_trace)) {}

SimMachine::~SimMachine() = default;

ScenarioRunOutput SimMachine::run_scenario(const std::vector<CoreStream>& streams,
                                           std::uint32_t observed_core,
                                           std::uint32_t scenario_index, NcMode nc_mode) {
  return impl_->run_scenario(streams, observed_core, scenario_index, nc_mode);
}

std::vector<CoreRunStats> SimMachine::run_plain(const std::vector<CoreStream>& streams,
                                                NcMode nc_mode) {
  return impl_->run_plain(streams, nc_mode);
}

void SimMachine::silent_cache_reset() {
  for (auto& line : impl_->cache) line = CacheLine{};
}

std::uint64_t SimMachine::now() const { return impl_->now; }
const SimSystemModel& SimMachine::model() const { return impl_->model; }
const TransactionTrace& SimMachine::trace() const { return impl_->trace_data; }

std::map<std::string, std::uint64_t> SimMachine::counter_values(std::uint32_t core) const {
  return impl_->counter_map(core);
}

SimRunResult simulate(const std::vector<CoreStream>& streams, const SimSystemModel& model,
                      const std::vector<ModuleRange>& ranges) {
  SimMachine machine(model, ranges, true);
  SimRunResult out;
  out.per_core = machine.run_plain(streams, model.nc_mode);
  out.trace = machine.trace();
  return out;
}

void write_trace_csv(const TransactionTrace& trace, std::ostream& out) {
  out << "core,addr,issue,complete,hit,module\n";
  for (const auto& r : trace.records) {
    out << r.core << ",0x" << std::hex << r.line_addr << std::dec << ',' << r.issue << ','
        << r.complete << ',' << (r.hit ? 1 : 0) << ',' << r.module << '\n';
  }
}

}  // namespace memscope::sim
