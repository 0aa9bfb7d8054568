#include "taskcomm/runtime.hpp"

#include <cassert>
#include <cstdlib>
#include <string>

#include "runtime_impl.hpp"

namespace taskcomm {

namespace ctx = boost::context;

namespace detail {

namespace {
thread_local RuntimeImpl::Worker* tls_worker = nullptr;
thread_local RuntimeImpl* tls_runtime = nullptr;

void update_max(std::atomic<std::uint64_t>& max, std::uint64_t value) {
  auto seen = max.load(std::memory_order_relaxed);
  while (value > seen && !max.compare_exchange_weak(seen, value, std::memory_order_relaxed)) {
  }
}

void update_max(std::atomic<int>& max, int value) {
  auto seen = max.load(std::memory_order_relaxed);
  while (value > seen && !max.compare_exchange_weak(seen, value, std::memory_order_relaxed)) {
  }
}
}  // namespace

// Thread-local accessors are kept out of line: a paused task may resume on a
// different thread and the compiler must not reuse a TLS address computed
// before the switch.
[[gnu::noinline]] RuntimeImpl::Worker* RuntimeImpl::current_worker() noexcept { return tls_worker; }

[[gnu::noinline]] RuntimeImpl* RuntimeImpl::current_runtime() noexcept {
  if (tls_worker != nullptr) return tls_worker->runtime;
  return tls_runtime;
}

Task& RuntimeImpl::current_task(const char* operation) {
  Worker* w = current_worker();
  if (w == nullptr || w->current == nullptr) {
    throw UsageError(std::string(operation) + " called outside of a task");
  }
  return *w->current;
}

RuntimeImpl::Worker* RuntimeImpl::local_worker() noexcept {
  Worker* w = current_worker();
  return (w != nullptr && w->runtime == this) ? w : nullptr;
}

RuntimeImpl::RuntimeImpl(Runtime& owner, RuntimeConfig config)
    : owner_(owner), config_(config), stacks_(config.stack_size) {
  if (config_.workers == 0) throw ConfigError("runtime needs at least one worker");
  if (config_.polling_period.count() <= 0) throw ConfigError("polling period must be positive");
}

RuntimeImpl::~RuntimeImpl() = default;

void RuntimeImpl::trace(const Task& task, TraceEvent event, int worker) {
  if (config_.trace == nullptr) return;
  config_.trace->record({.rank = config_.rank,
                         .worker = worker,
                         .task_kind = task.kind,
                         .task_id = static_cast<std::uint64_t>(task.id),
                         .event = event,
                         .timestamp_ns = 0,
                         .iteration = task.iteration});
}

void RuntimeImpl::run(std::function<void()> main) {
  if (current_worker() != nullptr) throw UsageError("Runtime::run called from inside a task");
  if (running_.exchange(true)) throw UsageError("Runtime::run is already active");

  auto root = std::make_shared<Task>();
  root->id = TaskId{next_id_.fetch_add(1)};
  root->runtime = this;
  root->body = std::move(main);
  root->kind = "root";
  {
    std::lock_guard lock(registry_mutex_);
    live_[static_cast<std::uint64_t>(root->id)] = root;
  }
  live_tasks_.store(1);
  spawned_.fetch_add(1);
  first_error_ = nullptr;
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = false;
  }
  {
    std::lock_guard lock(poll_thread_mutex_);
    poll_stop_ = false;
  }

  workers_.clear();
  for (std::size_t i = 0; i < config_.workers; ++i) {
    auto w = std::make_unique<Worker>();
    w->runtime = this;
    w->index = static_cast<int>(i);
    workers_.push_back(std::move(w));
  }
  for (auto& w : workers_) {
    Worker* raw = w.get();
    raw->thread = std::thread([this, raw] { worker_loop(*raw); });
  }
  poller_ = std::thread([this] { polling_loop(); });

  trace(*root, TraceEvent::Created, -1);
  make_ready(std::move(root));

  {
    std::unique_lock lock(done_mutex_);
    done_cv_.wait(lock, [this] { return live_tasks_.load() == 0; });
  }

  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  ready_cv_.notify_all();
  for (auto& w : workers_) w->thread.join();
  {
    std::lock_guard lock(poll_thread_mutex_);
    poll_stop_ = true;
  }
  poll_cv_.notify_all();
  poller_.join();
  workers_.clear();
  running_.store(false);

  if (first_error_) std::rethrow_exception(std::exchange(first_error_, nullptr));
}

void RuntimeImpl::polling_loop() {
  tls_runtime = this;
  auto next = std::chrono::steady_clock::now() + config_.polling_period;
  std::unique_lock lock(poll_thread_mutex_);
  while (!poll_stop_) {
    poll_cv_.wait_until(lock, next, [this] { return poll_stop_; });
    if (poll_stop_) break;
    lock.unlock();
    polling_.poll(true);
    lock.lock();
    next += config_.polling_period;
    const auto now = std::chrono::steady_clock::now();
    if (next < now) next = now + config_.polling_period;
  }
  tls_runtime = nullptr;
}

void RuntimeImpl::worker_loop(Worker& worker) {
  tls_worker = &worker;
  tls_runtime = this;
  while (auto task = next_task(worker)) execute(worker, std::move(task));
  tls_worker = nullptr;
  tls_runtime = nullptr;
}

std::shared_ptr<Task> RuntimeImpl::next_task(Worker& worker) {
  if (worker.next) return std::exchange(worker.next, nullptr);
  std::unique_lock lock(queue_mutex_);
  for (;;) {
    if (!ready_.empty()) {
      auto task = std::move(ready_.front());
      ready_.pop_front();
      return task;
    }
    if (stopping_) return nullptr;
    // Serve the polling services before letting the core go idle.
    lock.unlock();
    polling_.poll(false);
    lock.lock();
    if (!ready_.empty() || stopping_) continue;
    ready_cv_.wait(lock, [this] { return !ready_.empty() || stopping_; });
  }
}

void RuntimeImpl::make_ready(std::shared_ptr<Task> task) {
  task->state.store(TaskState::Ready, std::memory_order_release);
  {
    std::lock_guard lock(queue_mutex_);
    ready_.push_back(std::move(task));
  }
  ready_cv_.notify_one();
}

void RuntimeImpl::execute(Worker& worker, std::shared_ptr<Task> task) {
  worker.current = task.get();
  const int now_executing = executing_.fetch_add(1) + 1;
  update_max(max_executing_, now_executing);

  if (!task->started) {
    task->started = true;
    trace(*task, TraceEvent::Start, worker.index);
    Task* raw = task.get();
    task->fiber = ctx::fiber(std::allocator_arg, PooledStack(stacks_),
                             [this, raw](ctx::fiber&& scheduler) {
                               raw->scheduler = std::move(scheduler);
                               run_body(*raw);
                               raw->yield = YieldReason::Finished;
                               return std::move(raw->scheduler);
                             });
  } else {
    trace(*task, TraceEvent::Resume, worker.index);
  }
  task->state.store(TaskState::Running, std::memory_order_release);
  task->yield = YieldReason::None;
  task->fiber = std::move(task->fiber).resume();

  executing_.fetch_sub(1);
  worker.current = nullptr;
  if (task->yield == YieldReason::Finished) {
    on_finished(task, &worker);
  } else {
    assert(task->yield == YieldReason::Blocked);
    on_blocked(task);
  }
}

void RuntimeImpl::run_body(Task& task) {
  try {
    task.body();
  } catch (const ctx::detail::forced_unwind&) {
    throw;
  } catch (...) {
    std::lock_guard lock(error_mutex_);
    if (!first_error_) first_error_ = std::current_exception();
  }
}

bool RuntimeImpl::pause(Task& task) {
  {
    std::lock_guard lock(task.mutex);
    if (task.resume_pending) {
      task.resume_pending = false;
      return false;
    }
  }
  task.yield = YieldReason::Blocked;
  task.scheduler = std::move(task.scheduler).resume();
  return true;
}

void RuntimeImpl::on_blocked(const std::shared_ptr<Task>& task) {
  pauses_.fetch_add(1, std::memory_order_relaxed);
  bool requeue = false;
  {
    std::lock_guard lock(task->mutex);
    trace(*task, TraceEvent::Pause, -1);
    if (task->resume_pending) {
      // Woken while switching out.
      task->resume_pending = false;
      requeue = true;
    } else {
      task->state.store(TaskState::Paused, std::memory_order_release);
      update_max(paused_high_water_, paused_now_.fetch_add(1) + 1);
    }
  }
  if (requeue) make_ready(task);
}

void RuntimeImpl::wake(const std::shared_ptr<Task>& task) {
  {
    std::lock_guard lock(task->mutex);
    if (task->state.load(std::memory_order_acquire) != TaskState::Paused) {
      task->resume_pending = true;
      return;
    }
    paused_now_.fetch_sub(1);
  }
  // Back to the tail of the ready queue.
  make_ready(task);
}

void RuntimeImpl::on_finished(const std::shared_ptr<Task>& task, Worker* worker) {
  trace(*task, TraceEvent::End, worker != nullptr ? worker->index : -1);
  task->body = nullptr;
  task->state.store(TaskState::ExecutionFinished, std::memory_order_release);

  // Drop the execution's own reference and set the finished bit atomically.
  auto word = task->counter_word.load(std::memory_order_acquire);
  std::uint64_t next = 0;
  do {
    assert((word >> 1) >= 1 && (word & 1) == 0);
    next = (((word >> 1) - 1) << 1) | 1;
  } while (!task->counter_word.compare_exchange_weak(word, next, std::memory_order_acq_rel));
  if ((next >> 1) == 0) release(task, worker);
}

void RuntimeImpl::release(const std::shared_ptr<Task>& task, Worker* worker) {
  assert(task->state.load() == TaskState::ExecutionFinished);
  assert(task->event_count() == 0);

  std::vector<std::shared_ptr<Task>> ready;
  {
    std::lock_guard lock(deps_mutex_);
    task->state.store(TaskState::Completed, std::memory_order_release);
    for (auto& successor : task->successors) {
      if (--successor->pending_predecessors == 0) ready.push_back(std::move(successor));
    }
    task->successors.clear();
    if (task->parent) task->parent->children.remove(*task, task->accesses);
  }
  trace(*task, TraceEvent::Completed, worker != nullptr ? worker->index : -1);
  completed_.fetch_add(1, std::memory_order_relaxed);

  for (auto& successor : ready) {
    if (worker != nullptr && !worker->next) {
      successor->state.store(TaskState::Ready, std::memory_order_release);
      worker->next = std::move(successor);
    } else {
      make_ready(std::move(successor));
    }
  }

  if (task->parent) {
    auto& parent = task->parent;
    bool wake_parent = false;
    {
      std::lock_guard lock(parent->mutex);
      --parent->live_children;
      wake_parent = parent->live_children == 0 && parent->in_taskwait;
    }
    if (wake_parent) wake(parent);
  }

  {
    std::lock_guard lock(registry_mutex_);
    live_.erase(static_cast<std::uint64_t>(task->id));
  }
  // Under the lock so `run` cannot return while this thread still touches the
  // runtime.
  std::lock_guard lock(done_mutex_);
  if (live_tasks_.fetch_sub(1) == 1) done_cv_.notify_all();
}

TaskId RuntimeImpl::spawn(std::function<void()> body, std::vector<DataAccess> accesses,
                          SpawnOptions options) {
  Task& parent = current_task("spawn_task");
  for (const auto& access : accesses) validate(access);

  auto task = std::make_shared<Task>();
  task->id = TaskId{next_id_.fetch_add(1)};
  task->runtime = this;
  task->body = std::move(body);
  task->accesses = std::move(accesses);
  task->kind = options.kind;
  task->iteration = options.iteration;
  task->parent = parent.shared_from_this();

  {
    std::lock_guard lock(parent.mutex);
    ++parent.live_children;
  }
  live_tasks_.fetch_add(1);
  spawned_.fetch_add(1, std::memory_order_relaxed);
  {
    std::lock_guard lock(registry_mutex_);
    live_[static_cast<std::uint64_t>(task->id)] = task;
  }
  Worker* worker = local_worker();
  trace(*task, TraceEvent::Created, worker != nullptr ? worker->index : -1);

  bool ready = false;
  {
    std::lock_guard lock(deps_mutex_);
    std::vector<Task*> predecessors;
    parent.children.add(*task, task->accesses, predecessors);
    for (Task* p : predecessors) p->successors.push_back(task);
    task->pending_predecessors = predecessors.size();
    ready = predecessors.empty();
  }
  const TaskId id = task->id;
  if (ready) make_ready(std::move(task));
  return id;
}

void RuntimeImpl::taskwait() {
  Task& task = current_task("taskwait");
  std::unique_lock lock(task.mutex);
  while (task.live_children > 0) {
    task.in_taskwait = true;
    lock.unlock();
    pause(task);
    lock.lock();
  }
  task.in_taskwait = false;
}

BlockingContext RuntimeImpl::get_blocking_context() {
  Task& task = current_task("get_current_blocking_context");
  std::lock_guard lock(task.mutex);
  ++task.ctx_generation;
  task.latch = Latch::Armed;
  task.ctx_unblocked = false;
  return BlockingContext(task.shared_from_this(), task.ctx_generation);
}

void RuntimeImpl::block(const BlockingContext& ctx) {
  Task& task = current_task("block_current_task");
  if (ctx.task_.get() != &task) {
    throw InvalidContextError("block_current_task: context does not belong to the calling task");
  }
  {
    std::lock_guard lock(task.mutex);
    if (ctx.generation_ != task.ctx_generation) {
      throw InvalidContextError("block_current_task: blocking context has been invalidated");
    }
    if (task.latch == Latch::Released) {
      task.latch = Latch::Consumed;
      return;
    }
    if (task.latch != Latch::Armed) {
      throw InvalidContextError("block_current_task: blocking context already used");
    }
    task.latch = Latch::Blocking;
  }
  pause(task);
  std::lock_guard lock(task.mutex);
  assert(task.latch == Latch::Released);
  task.latch = Latch::Consumed;
}

void RuntimeImpl::unblock(const BlockingContext& ctx) {
  if (!ctx) throw InvalidContextError("unblock_task: empty blocking context");
  const auto& task = ctx.task_;
  bool need_wake = false;
  {
    std::lock_guard lock(task->mutex);
    if (ctx.generation_ != task->ctx_generation) {
      throw InvalidContextError("unblock_task: blocking context has been invalidated");
    }
    if (task->ctx_unblocked) throw UsageError("unblock_task: context already unblocked");
    task->ctx_unblocked = true;
    need_wake = task->latch == Latch::Blocking;
    task->latch = Latch::Released;
  }
  if (need_wake) task->runtime->wake(task);
}

EventCounterHandle RuntimeImpl::get_event_counter() {
  Task& task = current_task("get_current_event_counter");
  return EventCounterHandle(task.shared_from_this());
}

void RuntimeImpl::increase(const EventCounterHandle& handle, unsigned increment) {
  Task& task = current_task("increase_current_task_event_counter");
  if (handle.task_.get() != &task) {
    throw UsageError("increase_current_task_event_counter: only the owning task may bind events");
  }
  if (increment == 0) throw UsageError("increase_current_task_event_counter: zero increment");
  task.counter_word.fetch_add(static_cast<std::uint64_t>(increment) << 1,
                              std::memory_order_acq_rel);
}

void RuntimeImpl::decrease(const EventCounterHandle& handle, unsigned decrement) {
  if (!handle) throw UsageError("decrease_task_event_counter: empty handle");
  if (decrement == 0) throw UsageError("decrease_task_event_counter: zero decrement");
  const auto& task = handle.task_;
  if (task->state.load(std::memory_order_acquire) == TaskState::Completed) {
    throw UsageError("decrease_task_event_counter: task has already completed");
  }
  auto word = task->counter_word.load(std::memory_order_acquire);
  std::uint64_t next = 0;
  do {
    const std::uint64_t count = word >> 1;
    const bool finished = (word & 1) != 0;
    // A running task holds one reference of its own that only finishing drops.
    const std::uint64_t available = finished ? count : count - 1;
    if (decrement > available) {
      throw UsageError("decrease_task_event_counter: decrement " + std::to_string(decrement) +
                       " exceeds " + std::to_string(available) + " pending events");
    }
    next = ((count - decrement) << 1) | (word & 1);
  } while (!task->counter_word.compare_exchange_weak(word, next, std::memory_order_acq_rel));

  if ((next >> 1) == 0) task->runtime->release(task, nullptr);
}

std::optional<TaskSnapshot> RuntimeImpl::inspect(TaskId id) const {
  const auto raw = static_cast<std::uint64_t>(id);
  {
    std::lock_guard lock(registry_mutex_);
    auto it = live_.find(raw);
    if (it != live_.end()) {
      return TaskSnapshot{it->second->state.load(), it->second->event_count()};
    }
  }
  if (raw != 0 && raw < next_id_.load()) return TaskSnapshot{TaskState::Completed, 0};
  return std::nullopt;
}

RuntimeStats RuntimeImpl::stats() const {
  return {spawned_.load(), completed_.load(), pauses_.load(), paused_high_water_.load(),
          max_executing_.load()};
}

}  // namespace detail

// ---------------------------------------------------------------------------

std::string_view to_string(TaskState state) noexcept {
  switch (state) {
    case TaskState::Created: return "created";
    case TaskState::Ready: return "ready";
    case TaskState::Running: return "running";
    case TaskState::Paused: return "paused";
    case TaskState::ExecutionFinished: return "execution-finished";
    case TaskState::Completed: return "completed";
  }
  return "unknown";
}

TaskId BlockingContext::task() const noexcept { return task_ ? task_->id : TaskId{}; }
TaskId EventCounterHandle::task() const noexcept { return task_ ? task_->id : TaskId{}; }

std::optional<std::chrono::microseconds> polling_period_from_env() {
  const char* value = std::getenv("TASKCOMM_POLLING_PERIOD_US");
  if (value == nullptr || *value == '\0') return std::nullopt;
  char* end = nullptr;
  const long long us = std::strtoll(value, &end, 10);
  if (*end != '\0' || us <= 0) return std::nullopt;
  return std::chrono::microseconds(us);
}

Runtime::Runtime(RuntimeConfig config)
    : impl_(std::make_unique<detail::RuntimeImpl>(*this, config)) {}

Runtime::~Runtime() = default;

void Runtime::run(std::function<void()> main) { impl_->run(std::move(main)); }

const RuntimeConfig& Runtime::config() const noexcept { return impl_->config(); }

RuntimeStats Runtime::stats() const { return impl_->stats(); }

std::optional<TaskSnapshot> Runtime::inspect(TaskId id) const { return impl_->inspect(id); }

void Runtime::register_polling_service(std::string name, PollingFunction function, void* payload) {
  impl_->polling().add(std::move(name), function, payload);
}

void Runtime::unregister_polling_service(std::string_view name, PollingFunction function,
                                         void* payload) {
  impl_->polling().remove(name, function, payload);
}

Runtime* Runtime::current() noexcept {
  auto* rt = detail::RuntimeImpl::current_runtime();
  return rt != nullptr ? &rt->owner() : nullptr;
}

void run(std::size_t workers, std::function<void()> main) {
  RuntimeConfig config;
  config.workers = workers;
  if (auto period = polling_period_from_env()) config.polling_period = *period;
  Runtime runtime(config);
  runtime.run(std::move(main));
}

namespace {
detail::RuntimeImpl& require_runtime(const char* operation) {
  auto* rt = detail::RuntimeImpl::current_runtime();
  if (rt == nullptr) throw UsageError(std::string(operation) + " called outside of a runtime");
  return *rt;
}
}  // namespace

TaskId spawn_task(std::function<void()> body, std::vector<DataAccess> accesses,
                  SpawnOptions options) {
  return require_runtime("spawn_task").spawn(std::move(body), std::move(accesses), options);
}

void taskwait() { require_runtime("taskwait").taskwait(); }

bool in_task() noexcept {
  auto* w = detail::RuntimeImpl::current_worker();
  return w != nullptr && w->current != nullptr;
}

TaskId current_task_id() { return detail::RuntimeImpl::current_task("current_task_id").id; }

BlockingContext get_current_blocking_context() {
  return require_runtime("get_current_blocking_context").get_blocking_context();
}

void block_current_task(const BlockingContext& ctx) {
  require_runtime("block_current_task").block(ctx);
}

void unblock_task(const BlockingContext& ctx) { detail::RuntimeImpl::unblock(ctx); }

EventCounterHandle get_current_event_counter() {
  return require_runtime("get_current_event_counter").get_event_counter();
}

void increase_current_task_event_counter(const EventCounterHandle& handle, unsigned increment) {
  require_runtime("increase_current_task_event_counter").increase(handle, increment);
}

void decrease_task_event_counter(const EventCounterHandle& handle, unsigned decrement) {
  detail::RuntimeImpl::decrease(handle, decrement);
}

void register_polling_service(std::string name, PollingFunction function, void* payload) {
  require_runtime("register_polling_service").polling().add(std::move(name), function, payload);
}

void unregister_polling_service(std::string_view name, PollingFunction function, void* payload) {
  require_runtime("unregister_polling_service").polling().remove(name, function, payload);
}

}  // namespace taskcomm
