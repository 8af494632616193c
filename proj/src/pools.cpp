#include "memscope/pools.hpp"

#include <sys/mman.h>

#include <algorithm>
#include <cstdio>

#include "memscope/error.hpp"

namespace memscope {

MemoryPool::MemoryPool(std::uint32_t id, MemoryRegionDescriptor region, std::uint64_t page_size)
    : id_(id), region_(std::move(region)), page_size_(page_size) {
  if (page_size_ == 0 || region_.size % page_size_ != 0)
    throw Error("pool " + std::to_string(id_) + ": region size " + std::to_string(region_.size) +
                " is not a multiple of the page size");
  used_.assign(region_.size / page_size_, false);
}

PoolBuffer MemoryPool::alloc(std::uint64_t length) {
  if (length == 0) throw Error("pool " + std::to_string(id_) + ": zero-length allocation");
  const std::uint64_t pages = (length + page_size_ - 1) / page_size_;

  // First fit: earliest contiguous free run wins.
  std::uint64_t run = 0;
  for (std::uint64_t i = 0; i < used_.size(); ++i) {
    run = used_[i] ? 0 : run + 1;
    if (run == pages) {
      const std::uint64_t first = i + 1 - pages;
      std::fill(used_.begin() + static_cast<std::ptrdiff_t>(first),
                used_.begin() + static_cast<std::ptrdiff_t>(first + pages), true);
      allocations_.emplace(first * page_size_, pages);
      allocated_pages_ += pages;
      PoolBuffer buf{id_, first * page_size_, length, {}};
      if (!backing_.empty()) buf.data = backing_.subspan(buf.offset, length);
      return buf;
    }
  }
  throw Error("pool " + std::to_string(id_) + ": no contiguous run of " + std::to_string(pages) +
              " free pages for " + std::to_string(length) + " bytes (" +
              std::to_string(free_pages()) + " pages free)");
}

void MemoryPool::free(const PoolBuffer& buffer) {
  if (buffer.pool_id != id_)
    throw Error("pool " + std::to_string(id_) + ": buffer belongs to pool " +
                std::to_string(buffer.pool_id));
  auto it = allocations_.find(buffer.offset);
  if (it == allocations_.end())
    throw Error("pool " + std::to_string(id_) + ": free of unallocated offset " +
                std::to_string(buffer.offset));
  const std::uint64_t first = buffer.offset / page_size_;
  std::fill(used_.begin() + static_cast<std::ptrdiff_t>(first),
            used_.begin() + static_cast<std::ptrdiff_t>(first + it->second), false);
  allocated_pages_ -= it->second;
  allocations_.erase(it);
}

void MemoryPool::set_backing(std::span<std::byte> mem) {
  if (mem.size() < region_.size)
    throw Error("pool " + std::to_string(id_) + ": backing smaller than region");
  backing_ = mem;
}

// Anonymous mapping sized to one region. MAP_NORESERVE plus lazy zero pages
// means a 256 MiB described region costs nothing until a buffer touches it.
struct PoolManager::Mapping {
  void* ptr = MAP_FAILED;
  std::size_t len = 0;

  explicit Mapping(std::size_t n) : len(n) {
    ptr = ::mmap(nullptr, len, PROT_READ | PROT_WRITE,
                 MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (ptr == MAP_FAILED) throw Error("mmap of pool backing failed");
  }
  ~Mapping() {
    if (ptr != MAP_FAILED) ::munmap(ptr, len);
  }
  Mapping(const Mapping&) = delete;
  Mapping& operator=(const Mapping&) = delete;

  std::span<std::byte> span() { return {static_cast<std::byte*>(ptr), len}; }
};

PoolManager::~PoolManager() = default;
PoolManager::PoolManager(PoolManager&&) noexcept = default;
PoolManager& PoolManager::operator=(PoolManager&&) noexcept = default;

PoolManager PoolManager::create(std::vector<MemoryRegionDescriptor> regions,
                                std::uint64_t page_size) {
  // Overlap scan over [base, base+size) intervals; any overlap poisons the
  // whole set because pool addressing would be ambiguous.
  for (std::size_t a = 0; a < regions.size(); ++a) {
    for (std::size_t b = a + 1; b < regions.size(); ++b) {
      const auto& x = regions[a];
      const auto& y = regions[b];
      if (x.base < y.base + y.size && y.base < x.base + x.size)
        throw Error("regions '" + x.name + "' and '" + y.name + "' overlap");
    }
  }
  PoolManager mgr;
  std::uint32_t id = 1;
  for (auto& r : regions) {
    mgr.pools_.push_back(std::make_unique<MemoryPool>(id++, std::move(r), page_size));
  }
  return mgr;
}

MemoryPool& PoolManager::pool(std::uint32_t id) {
  if (!has_pool(id)) throw Error("no pool with id " + std::to_string(id));
  return *pools_[id - 1];
}

const MemoryPool& PoolManager::pool(std::uint32_t id) const {
  if (!has_pool(id)) throw Error("no pool with id " + std::to_string(id));
  return *pools_[id - 1];
}

void PoolManager::attach_backing() {
  if (!backing_.empty()) return;
  for (auto& p : pools_) {
    backing_.push_back(std::make_unique<Mapping>(p->region().size));
    p->set_backing(backing_.back()->span());
  }
}

std::string PoolManager::status() const {
  std::string out;
  char buf[160];
  for (const auto& p : pools_) {
    std::snprintf(buf, sizeof(buf), "id=%u size=%llu base=0x%llx free=%llu\n", p->id(),
                  static_cast<unsigned long long>(p->region().size),
                  static_cast<unsigned long long>(p->region().base),
                  static_cast<unsigned long long>(p->free_pages()));
    out += buf;
  }
  return out;
}

}  // namespace memscope
