#pragma once

#include <boost/context/stack_context.hpp>

#include <cstddef>
#include <mutex>
#include <vector>

namespace taskcomm::detail {

/// Reuses guard-page protected stacks across tasks. Only tasks that are
/// running or paused hold a stack.
class StackPool {
 public:
  explicit StackPool(std::size_t size);
  ~StackPool();
  StackPool(const StackPool&) = delete;
  StackPool& operator=(const StackPool&) = delete;

  boost::context::stack_context allocate();
  void deallocate(boost::context::stack_context& sctx) noexcept;

  std::size_t stack_size() const noexcept { return size_; }

 private:
  std::size_t size_;
  std::mutex mutex_;
  std::vector<boost::context::stack_context> free_;
};

/// StackAllocator adaptor handed to boost::context::fiber (which copies it).
class PooledStack {
 public:
  explicit PooledStack(StackPool& pool) noexcept : pool_(&pool) {}
  boost::context::stack_context allocate() { return pool_->allocate(); }
  void deallocate(boost::context::stack_context& sctx) noexcept { pool_->deallocate(sctx); }

 private:
  StackPool* pool_;
};

}  // namespace taskcomm::detail
