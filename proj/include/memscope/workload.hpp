#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memscope/pools.hpp"

namespace memscope {

// Per-line access strategies. The single-letter codes are what experiment
// lines use; idle has no code because it is never requested explicitly, the
// scenario builder assigns it to leftover cores.
enum class Strategy : std::uint8_t {
  read,          // 'r' sequential reads
  write,         // 'w' sequential writes (write-allocate, write-back)
  latency,       // 'l' dependent pointer chase
  nc_read,       // 's' reads with cache-maintenance so they never hit
  nc_write,      // 'x' writes with cache-maintenance so they never hit
  nc_latency,    // 'm' pointer chase with cache-maintenance
  stream_write,  // 'y' streaming stores, no cache allocation
  idle,          // busy loop, no memory traffic
};

// When a non-cacheable strategy performs its cache maintenance.
//   dcadd:   clean+invalidate before the access; the access can never hit.
//   dcafter: invalidate after the access; the first touch may still hit.
enum class NcMode : std::uint8_t { dcadd, dcafter };

char strategy_code(Strategy s);
std::string strategy_name(Strategy s);
// Accepts r/w/l/s/x/m/y. 'n' (paired non-temporal load/store) is reserved
// and reported as such; anything else is unknown. Throws Error.
Strategy strategy_from_code(char c);

constexpr bool strategy_is_latency(Strategy s) {  // l, m
  return s == Strategy::latency || s == Strategy::nc_latency;
}
constexpr bool strategy_is_store(Strategy s) {  // w, x, y
  return s == Strategy::write || s == Strategy::nc_write || s == Strategy::stream_write;
}
constexpr bool strategy_is_noncacheable(Strategy s) {  // s, x, m
  return s == Strategy::nc_read || s == Strategy::nc_write || s == Strategy::nc_latency;
}

// Pointer-chase chain over the cache lines of a buffer. next[i] is the line
// visited after line i; following next from start visits every line exactly
// once before returning to start (one N-cycle).
struct LatencyChain {
  std::uint32_t lines = 0;
  std::uint32_t start = 0;
  std::vector<std::uint32_t> next;
};

// Builds the chain in three steps: identity order, a seeded uniform shuffle
// of it, then linking each shuffled element to its successor (wrapping), which
// yields a single cycle by construction. The shuffle uses a local fixed PRNG
// so a given seed produces the same chain on every platform.
LatencyChain make_latency_chain(std::uint32_t lines, std::uint64_t seed);

// Writes the successor index into the first 8-byte word of every line, which
// is what the chase kernels load. Requires data backing.
void write_chain(const LatencyChain& chain, PoolBuffer& buffer);

// Fills the buffer with consecutive uint32 words (word i holds i) so that a
// later scan can detect corruption.
void init_bandwidth_buffer(PoolBuffer& buffer);

// Returns the index of the first wrong word, or nothing when intact.
std::optional<std::uint64_t> verify_bandwidth_buffer(const PoolBuffer& buffer);

// One stressor/main activity execution request against a backend.
struct WorkloadRun {
  Strategy strategy = Strategy::read;
  PoolBuffer buffer;                     // unused for idle
  const LatencyChain* chain = nullptr;   // required for latency strategies
  std::uint64_t iterations = 1;
  NcMode nc_mode = NcMode::dcadd;
  // idle only: native watches the flag, the simulator runs for the duration.
  const std::atomic<bool>* stop = nullptr;
  std::uint64_t idle_duration_ns = 0;
};

struct WorkloadOutcome {
  std::uint64_t bytes_touched = 0;    // iterations * buffer length, 0 for idle
  std::uint64_t line_accesses = 0;    // total line-granular accesses
  std::uint64_t elapsed_ns = 0;       // whole measured run
  std::vector<std::uint64_t> per_iteration_ns;
  std::vector<std::string> warnings;
};

// Deterministic splitmix64; used for chain shuffles and injected delays so
// results do not depend on the platform's RNG.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // Uniform value in [0, bound) via rejection sampling.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t limit = ~0ull - ~0ull % bound;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }
};

}  // namespace memscope
