#pragma once

#include <boost/context/fiber.hpp>

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string_view>
#include <vector>

#include "dependency_domain.hpp"
#include "taskcomm/data_access.hpp"
#include "taskcomm/runtime.hpp"

namespace taskcomm::detail {

class RuntimeImpl;

enum class YieldReason : std::uint8_t { None, Blocked, Finished };

// Latch of the task's current blocking context.
enum class Latch : std::uint8_t { Armed, Blocking, Released, Consumed };

struct Task : std::enable_shared_from_this<Task> {
  TaskId id{};
  RuntimeImpl* runtime = nullptr;
  std::function<void()> body;
  std::vector<DataAccess> accesses;
  std::string_view kind;
  int iteration = -1;
  std::shared_ptr<Task> parent;

  std::atomic<TaskState> state{TaskState::Created};
  // (pending event count << 1) | execution-finished bit. Starts at count 1.
  std::atomic<std::uint64_t> counter_word{2};

  // Guarded by `mutex`.
  std::mutex mutex;
  bool resume_pending = false;
  bool in_taskwait = false;
  std::size_t live_children = 0;
  std::uint64_t ctx_generation = 0;
  Latch latch = Latch::Consumed;
  bool ctx_unblocked = false;

  // Guarded by the runtime's dependency lock.
  std::size_t pending_predecessors = 0;
  std::vector<std::shared_ptr<Task>> successors;
  DependencyDomain children;

  // Touched only by the thread currently executing the task.
  boost::context::fiber fiber;
  boost::context::fiber scheduler;
  YieldReason yield = YieldReason::None;
  bool started = false;

  std::uint64_t event_count() const noexcept {
    return counter_word.load(std::memory_order_acquire) >> 1;
  }
};

}  // namespace taskcomm::detail
