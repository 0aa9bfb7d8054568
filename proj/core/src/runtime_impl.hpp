#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "stack_pool.hpp"
#include "task.hpp"
#include "taskcomm/polling.hpp"
#include "taskcomm/runtime.hpp"
#include "taskcomm/trace.hpp"

namespace taskcomm::detail {

class RuntimeImpl {
 public:
  struct Worker {
    RuntimeImpl* runtime = nullptr;
    int index = 0;
    Task* current = nullptr;
    std::shared_ptr<Task> next;  // immediate-successor slot
    std::thread thread;
  };

  RuntimeImpl(Runtime& owner, RuntimeConfig config);
  ~RuntimeImpl();

  void run(std::function<void()> main);

  TaskId spawn(std::function<void()> body, std::vector<DataAccess> accesses, SpawnOptions options);
  void taskwait();

  BlockingContext get_blocking_context();
  void block(const BlockingContext& ctx);
  static void unblock(const BlockingContext& ctx);

  EventCounterHandle get_event_counter();
  void increase(const EventCounterHandle& handle, unsigned increment);
  static void decrease(const EventCounterHandle& handle, unsigned decrement);

  std::optional<TaskSnapshot> inspect(TaskId id) const;
  RuntimeStats stats() const;

  Runtime& owner() noexcept { return owner_; }
  const RuntimeConfig& config() const noexcept { return config_; }
  PollingRegistry& polling() noexcept { return polling_; }

  static Worker* current_worker() noexcept;
  static RuntimeImpl* current_runtime() noexcept;
  /// Task on the calling thread; throws UsageError outside a task.
  static Task& current_task(const char* operation);

 private:
  void worker_loop(Worker& worker);
  std::shared_ptr<Task> next_task(Worker& worker);
  void execute(Worker& worker, std::shared_ptr<Task> task);
  void run_body(Task& task);
  void on_finished(const std::shared_ptr<Task>& task, Worker* worker);
  void on_blocked(const std::shared_ptr<Task>& task);
  void release(const std::shared_ptr<Task>& task, Worker* worker);
  void make_ready(std::shared_ptr<Task> task);
  void wake(const std::shared_ptr<Task>& task);
  bool pause(Task& task);
  void polling_loop();
  void trace(const Task& task, TraceEvent event, int worker);
  Worker* local_worker() noexcept;

  Runtime& owner_;
  RuntimeConfig config_;
  StackPool stacks_;
  PollingRegistry polling_;

  std::vector<std::unique_ptr<Worker>> workers_;
  std::thread poller_;

  std::mutex queue_mutex_;
  std::condition_variable ready_cv_;
  std::deque<std::shared_ptr<Task>> ready_;
  bool stopping_ = false;

  std::mutex deps_mutex_;

  mutable std::mutex registry_mutex_;
  std::unordered_map<std::uint64_t, std::shared_ptr<Task>> live_;
  std::atomic<std::uint64_t> next_id_{1};

  std::mutex done_mutex_;
  std::condition_variable done_cv_;
  std::atomic<std::uint64_t> live_tasks_{0};

  std::mutex poll_thread_mutex_;
  std::condition_variable poll_cv_;
  bool poll_stop_ = false;

  std::mutex error_mutex_;
  std::exception_ptr first_error_;

  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> spawned_{0};
  std::atomic<std::uint64_t> completed_{0};
  std::atomic<std::uint64_t> pauses_{0};
  std::atomic<std::uint64_t> paused_now_{0};
  std::atomic<std::uint64_t> paused_high_water_{0};
  std::atomic<int> executing_{0};
  std::atomic<int> max_executing_{0};
};

}  // namespace taskcomm::detail
