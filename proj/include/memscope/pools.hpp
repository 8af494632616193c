#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "memscope/region_config.hpp"

namespace memscope {

// A slice of a pool handed to a workload. offset/length are page-granular
// bookkeeping values; data is the host backing (empty when the pool has no
// backing attached, which is fine for pure bookkeeping use).
struct PoolBuffer {
  std::uint32_t pool_id = 0;
  std::uint64_t offset = 0;  // bytes from the region base
  std::uint64_t length = 0;  // requested length in bytes
  std::span<std::byte> data;

  bool valid() const { return pool_id != 0; }
  // Address the buffer would occupy in the described physical map. The
  // simulator indexes its cache with this, so placement effects carry over.
  std::uint64_t target_addr(std::uint64_t region_base) const { return region_base + offset; }
};

// Fixed-size page pool over one region. First-fit over a page bitmap: the
// allocator scans from page 0 and takes the first contiguous run that fits.
class MemoryPool {
 public:
  MemoryPool(std::uint32_t id, MemoryRegionDescriptor region,
             std::uint64_t page_size = kPageSize);

  // Rounds length up to whole pages. Throws Error when no contiguous run of
  // free pages can hold it.
  PoolBuffer alloc(std::uint64_t length);
  // Throws Error on double free or on a buffer this pool never handed out.
  void free(const PoolBuffer& buffer);

  std::uint32_t id() const { return id_; }
  const MemoryRegionDescriptor& region() const { return region_; }
  std::uint64_t page_size() const { return page_size_; }
  std::uint64_t total_pages() const { return used_.size(); }
  std::uint64_t free_pages() const { return total_pages() - allocated_pages_; }
  std::uint64_t allocated_pages() const { return allocated_pages_; }
  std::size_t live_allocations() const { return allocations_.size(); }

  void set_backing(std::span<std::byte> mem);

 private:
  std::uint32_t id_;
  MemoryRegionDescriptor region_;
  std::uint64_t page_size_;
  std::vector<bool> used_;
  std::map<std::uint64_t, std::uint64_t> allocations_;  // offset -> page count
  std::uint64_t allocated_pages_ = 0;
  std::span<std::byte> backing_;
};

// Owns the pools discovered from a region list. Pool ids are 1-based and
// follow document order; they stay stable for the manager's lifetime.
class PoolManager {
 public:
  PoolManager() = default;
  ~PoolManager();
  PoolManager(PoolManager&&) noexcept;
  PoolManager& operator=(PoolManager&&) noexcept;

  // Rejects the whole set when any two regions overlap (the error names both
  // regions); otherwise builds one pool per descriptor.
  static PoolManager create(std::vector<MemoryRegionDescriptor> regions,
                            std::uint64_t page_size = kPageSize);

  std::size_t size() const { return pools_.size(); }
  bool has_pool(std::uint32_t id) const { return id >= 1 && id <= pools_.size(); }
  MemoryPool& pool(std::uint32_t id);
  const MemoryPool& pool(std::uint32_t id) const;

  // Maps anonymous zeroed host memory behind every pool. Buffers allocated
  // afterwards carry data spans into these mappings. Lazy OS commit keeps
  // large described regions cheap until actually touched.
  void attach_backing();

  // One line per pool: "id=1 size=1048576 base=0xa0000000 free=256".
  std::string status() const;

 private:
  std::vector<std::unique_ptr<MemoryPool>> pools_;
  struct Mapping;
  std::vector<std::unique_ptr<Mapping>> backing_;
};

}  // namespace memscope
