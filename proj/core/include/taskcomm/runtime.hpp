#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskcomm/data_access.hpp"
#include "taskcomm/error.hpp"
#include "taskcomm/polling.hpp"

namespace taskcomm {

class TraceRecorder;

namespace detail {
struct Task;
class RuntimeImpl;
}  // namespace detail

enum class TaskId : std::uint64_t {};

enum class TaskState : std::uint8_t {
  Created,
  Ready,
  Running,
  Paused,
  ExecutionFinished,
  Completed,
};

std::string_view to_string(TaskState state) noexcept;

/// Token for one pause-resume cycle of a task.
///
/// Obtaining a new context for the same task invalidates the previous one.
/// `unblock_task` may be called before `block_current_task`; the block then
/// returns immediately.
class BlockingContext {
 public:
  BlockingContext() = default;

  std::uint64_t generation() const noexcept { return generation_; }
  TaskId task() const noexcept;
  explicit operator bool() const noexcept { return task_ != nullptr; }

 private:
  friend class detail::RuntimeImpl;
  BlockingContext(std::shared_ptr<detail::Task> task, std::uint64_t generation)
      : task_(std::move(task)), generation_(generation) {}

  std::shared_ptr<detail::Task> task_;
  std::uint64_t generation_ = 0;
};

/// Handle to the pending-event counter of a task. The counter starts at 1 and
/// the task's dependencies are released once its body has returned and the
/// counter reaches zero.
class EventCounterHandle {
 public:
  EventCounterHandle() = default;

  TaskId task() const noexcept;
  explicit operator bool() const noexcept { return task_ != nullptr; }

  friend bool operator==(const EventCounterHandle& a, const EventCounterHandle& b) noexcept {
    return a.task_ == b.task_;
  }

 private:
  friend class detail::RuntimeImpl;
  explicit EventCounterHandle(std::shared_ptr<detail::Task> task) : task_(std::move(task)) {}

  std::shared_ptr<detail::Task> task_;
};

struct TaskSnapshot {
  TaskState state = TaskState::Created;
  std::uint64_t event_count = 0;
};

struct RuntimeStats {
  std::uint64_t tasks_spawned = 0;
  std::uint64_t tasks_completed = 0;
  std::uint64_t pauses = 0;
  std::uint64_t paused_high_water = 0;
  int max_concurrency = 0;
};

struct RuntimeConfig {
  std::size_t workers = 1;
  std::chrono::microseconds polling_period{1000};
  std::size_t stack_size = 256 * 1024;
  int rank = 0;                      // label for trace records
  TraceRecorder* trace = nullptr;    // optional, not owned
};

/// Reads the polling period from TASKCOMM_POLLING_PERIOD_US, if set and valid.
std::optional<std::chrono::microseconds> polling_period_from_env();

struct SpawnOptions {
  std::string_view kind = "task";  // trace label; must outlive the runtime
  int iteration = -1;              // trace annotation
};

/// A task-based runtime: a worker pool executing tasks whose ordering is
/// derived from declared data accesses, with support for pausing tasks,
/// periodic polling services and deferred dependency release.
///
/// A `Runtime` is driven by `run`, which executes a root task and returns once
/// the root and every descendant have completed. While `run` is active a
/// dedicated polling executor invokes the registered polling services.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Runs `main` as the root task. Rethrows the first exception that escaped
  /// any task body.
  void run(std::function<void()> main);

  const RuntimeConfig& config() const noexcept;
  RuntimeStats stats() const;

  /// State of a task; Completed for ids that have been released.
  std::optional<TaskSnapshot> inspect(TaskId id) const;

  void register_polling_service(std::string name, PollingFunction function, void* payload);
  void unregister_polling_service(std::string_view name, PollingFunction function, void* payload);

  /// Runtime of the task running on the calling thread, or nullptr.
  static Runtime* current() noexcept;

 private:
  friend class detail::RuntimeImpl;
  std::unique_ptr<detail::RuntimeImpl> impl_;
};

/// Convenience wrapper: builds a runtime with `workers` workers and runs `main`.
void run(std::size_t workers, std::function<void()> main);

// Operations below act on the runtime and task of the calling thread.

TaskId spawn_task(std::function<void()> body, std::vector<DataAccess> accesses = {},
                  SpawnOptions options = {});
void taskwait();
bool in_task() noexcept;
TaskId current_task_id();

BlockingContext get_current_blocking_context();
void block_current_task(const BlockingContext& ctx);
void unblock_task(const BlockingContext& ctx);

EventCounterHandle get_current_event_counter();
void increase_current_task_event_counter(const EventCounterHandle& handle, unsigned increment);
void decrease_task_event_counter(const EventCounterHandle& handle, unsigned decrement);

/// Registers on the runtime of the calling task.
void register_polling_service(std::string name, PollingFunction function, void* payload);
void unregister_polling_service(std::string_view name, PollingFunction function, void* payload);

}  // namespace taskcomm
