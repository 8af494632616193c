#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "memscope/error.hpp"

namespace memscope {

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kCacheLineBytes = 64;

// One memory module exposed to the allocator, taken from a region config
// document (a devicetree-style fragment listing candidate pools).
struct MemoryRegionDescriptor {
  std::string name;        // node label, e.g. "bram"
  std::uint64_t base = 0;  // physical base address (advisory metadata)
  std::uint64_t size = 0;  // bytes
  std::string compatible;

  bool operator==(const MemoryRegionDescriptor&) const = default;
};

struct RegionParseResult {
  // Accepted nodes in document order. Pool ids are assigned from this order.
  std::vector<MemoryRegionDescriptor> regions;
  // One human-readable entry per rejected node (bad reg shape, zero or
  // unaligned size). Rejection never aborts the parse.
  std::vector<std::string> diagnostics;
};

// Parses a config document. Grammar (a small devicetree subset):
//
//   document := node*
//   node     := IDENT '@' UNIT-HEX '{' prop* '}' ';'
//   prop     := ('device_type' | 'compatible') '=' STRING ';'
//            |  'reg' '=' '<' cells... '>' ';'
//
// Numbers inside <...> are 0x-prefixed hex or decimal; reg must carry exactly
// four cells (address hi/lo, size hi/lo). Nodes whose compatible string is not
// "mempool" are skipped silently. Malformed syntax throws ParseError with the
// offending line number.
RegionParseResult parse_region_config(std::string_view text,
                                      std::uint64_t page_size = kPageSize);

// Renders descriptors back into the document grammar so that
// parse(render(x)) == x for any accepted descriptor list.
std::string render_region_config(const std::vector<MemoryRegionDescriptor>& regions);

// Built-in region set used when the caller supplies no config document.
std::vector<MemoryRegionDescriptor> default_regions();

}  // namespace memscope
