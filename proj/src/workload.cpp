#include "memscope/workload.hpp"

#include <cstring>

#include "memscope/error.hpp"

namespace memscope {

char strategy_code(Strategy s) {
  switch (s) {
    case Strategy::read: return 'r';
    case Strategy::write: return 'w';
    case Strategy::latency: return 'l';
    case Strategy::nc_read: return 's';
    case Strategy::nc_write: return 'x';
    case Strategy::nc_latency: return 'm';
    case Strategy::stream_write: return 'y';
    case Strategy::idle: return 'i';
  }
  return '?';
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::read: return "read";
    case Strategy::write: return "write";
    case Strategy::latency: return "latency";
    case Strategy::nc_read: return "nc-read";
    case Strategy::nc_write: return "nc-write";
    case Strategy::nc_latency: return "nc-latency";
    case Strategy::stream_write: return "stream-write";
    case Strategy::idle: return "idle";
  }
  return "?";
}

Strategy strategy_from_code(char c) {
  switch (c) {
    case 'r': return Strategy::read;
    case 'w': return Strategy::write;
    case 'l': return Strategy::latency;
    case 's': return Strategy::nc_read;
    case 'x': return Strategy::nc_write;
    case 'm': return Strategy::nc_latency;
    case 'y': return Strategy::stream_write;
    case 'n':
      throw Error("strategy 'n' (paired non-temporal load/store) is reserved and not implemented");
    default:
      throw Error(std::string("unknown strategy code '") + c + "'");
  }
}

LatencyChain make_latency_chain(std::uint32_t lines, std::uint64_t seed) {
  if (lines == 0) throw Error("latency chain needs at least one line");

  // Step 1: identity order.
  std::vector<std::uint32_t> perm(lines);
  for (std::uint32_t i = 0; i < lines; ++i) perm[i] = i;

  // Step 2: Fisher-Yates with a platform-independent PRNG.
  SplitMix64 rng(seed);
  for (std::uint32_t i = lines - 1; i > 0; --i) {
    const auto j = static_cast<std::uint32_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }

  // Step 3: each visited line points at the next one in permutation order;
  // the last wraps to the first. A permutation linked this way is one cycle.
  LatencyChain chain;
  chain.lines = lines;
  chain.start = perm[0];
  chain.next.assign(lines, 0);
  for (std::uint32_t i = 0; i < lines; ++i) {
    chain.next[perm[i]] = perm[(i + 1) % lines];
  }
  return chain;
}

void write_chain(const LatencyChain& chain, PoolBuffer& buffer) {
  if (buffer.data.empty()) throw Error("write_chain: buffer has no data backing");
  if (static_cast<std::uint64_t>(chain.lines) * kCacheLineBytes > buffer.length)
    throw Error("write_chain: chain does not fit the buffer");
  for (std::uint32_t i = 0; i < chain.lines; ++i) {
    const std::uint64_t word = chain.next[i];
    std::memcpy(buffer.data.data() + static_cast<std::size_t>(i) * kCacheLineBytes, &word,
                sizeof(word));
  }
}

void init_bandwidth_buffer(PoolBuffer& buffer) {
  if (buffer.data.empty()) throw Error("init_bandwidth_buffer: buffer has no data backing");
  const std::uint64_t words = buffer.length / sizeof(std::uint32_t);
  auto* p = reinterpret_cast<std::uint32_t*>(buffer.data.data());
  for (std::uint64_t i = 0; i < words; ++i) p[i] = static_cast<std::uint32_t>(i);
}

std::optional<std::uint64_t> verify_bandwidth_buffer(const PoolBuffer& buffer) {
  if (buffer.data.empty()) throw Error("verify_bandwidth_buffer: buffer has no data backing");
  const std::uint64_t words = buffer.length / sizeof(std::uint32_t);
  const auto* p = reinterpret_cast<const std::uint32_t*>(buffer.data.data());
  for (std::uint64_t i = 0; i < words; ++i) {
    if (p[i] != static_cast<std::uint32_t>(i)) return i;
  }
  return std::nullopt;
}

}  // namespace memscope
