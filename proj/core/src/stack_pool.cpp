#include "stack_pool.hpp"

#include <sys/mman.h>
#include <unistd.h>

#include <new>

namespace taskcomm::detail {

namespace {
std::size_t page_size() {
  static const std::size_t size = static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
  return size;
}
}  // namespace

StackPool::StackPool(std::size_t size) {
  const std::size_t page = page_size();
  size_ = ((size + page - 1) / page) * page;
}

StackPool::~StackPool() {
  const std::size_t page = page_size();
  for (auto& sctx : free_) {
    void* base = static_cast<char*>(sctx.sp) - sctx.size - page;
    ::munmap(base, sctx.size + page);
  }
}

boost::context::stack_context StackPool::allocate() {
  {
    std::lock_guard lock(mutex_);
    if (!free_.empty()) {
      auto sctx = free_.back();
      free_.pop_back();
      return sctx;
    }
  }
  const std::size_t page = page_size();
  const std::size_t total = size_ + page;
  void* base = ::mmap(nullptr, total, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (base == MAP_FAILED) throw std::bad_alloc();
  // Lowest page is the guard; stacks grow down from `sp`.
  ::mprotect(base, page, PROT_NONE);
  boost::context::stack_context sctx;
  sctx.size = size_;
  sctx.sp = static_cast<char*>(base) + total;
  return sctx;
}

void StackPool::deallocate(boost::context::stack_context& sctx) noexcept {
  std::lock_guard lock(mutex_);
  free_.push_back(sctx);
}

}  // namespace taskcomm::detail
