#include "taskcomm/task_aware.hpp"

#include <algorithm>
#include <memory>
#include <sstream>
#include <utility>

namespace taskcomm {

namespace {
constexpr const char* kServiceName = "task-aware-tickets";
}  // namespace

std::string_view to_string(ThreadLevel level) noexcept {
  switch (level) {
    case ThreadLevel::Single: return "single";
    case ThreadLevel::Funneled: return "funneled";
    case ThreadLevel::Serialized: return "serialized";
    case ThreadLevel::Multiple: return "multiple";
    case ThreadLevel::TaskMultiple: return "task-multiple";
  }
  return "unknown";
}

TaskAwareComm::TaskAwareComm(Runtime& runtime, transport::Endpoint& endpoint)
    : runtime_(runtime), endpoint_(endpoint) {}

TaskAwareComm::~TaskAwareComm() {
  if (registered_) {
    try {
      runtime_.unregister_polling_service(kServiceName, &TaskAwareComm::poll_tickets, this);
    } catch (...) {
    }
  }
  for (Ticket* t : pending_) {
    if (!t->blocking) delete t;
  }
}

ThreadLevel TaskAwareComm::init_thread(ThreadLevel requested) {
  if (initialized_) throw UsageError("init_thread called twice");
  initialized_ = true;
  provided_ = requested;
  if (provided_ == ThreadLevel::TaskMultiple) {
    runtime_.register_polling_service(kServiceName, &TaskAwareComm::poll_tickets, this);
    registered_ = true;
  }
  return provided_;
}

void TaskAwareComm::check_active(const char* operation) const {
  if (!initialized_) throw UsageError(std::string(operation) + " called before init_thread");
  if (shut_down_) throw UsageError(std::string(operation) + " called after shutdown");
}

void TaskAwareComm::check_in_task(const char* operation) const {
  if (!in_task()) throw UsageError(std::string(operation) + " called outside of a task");
}

void TaskAwareComm::add_ticket(Ticket* ticket) {
  std::lock_guard lock(mutex_);
  pending_.push_back(ticket);
  ++metrics_.tickets_created;
  if (ticket->blocking) {
    ++metrics_.tasks_paused;
    metrics_.paused_high_water = std::max(metrics_.paused_high_water, ++paused_now_);
  } else {
    ++metrics_.events_bound;
  }
}

void TaskAwareComm::wait_blocking(std::span<transport::Request> requests,
                                  std::span<transport::Status> statuses) {
  Ticket ticket;
  ticket.blocking = true;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (!requests[i]) continue;
    transport::Status st;
    if (endpoint_.test(requests[i], &st)) {
      if (!statuses.empty()) statuses[i] = st;
      requests[i] = {};
      continue;
    }
    ticket.requests.push_back(std::exchange(requests[i], {}));
    ticket.outputs.push_back(statuses.empty() ? nullptr : &statuses[i]);
  }
  if (ticket.requests.empty()) {
    std::lock_guard lock(mutex_);
    ++metrics_.fast_path_hits;
    return;
  }
  ticket.remaining = ticket.requests.size();
  ticket.statuses.resize(ticket.requests.size());
  ticket.context = get_current_blocking_context();
  const BlockingContext ctx = ticket.context;
  add_ticket(&ticket);
  block_current_task(ctx);
}

transport::Status TaskAwareComm::ta_send(std::span<const std::byte> buffer, int dest, int tag,
                                         const transport::Communicator& comm) {
  check_active("ta_send");
  if (!interception_enabled()) return endpoint_.send(buffer, dest, tag, comm);
  check_in_task("ta_send");
  auto request = endpoint_.isend(buffer, dest, tag, comm);
  return ta_wait(request);
}

transport::Status TaskAwareComm::ta_ssend(std::span<const std::byte> buffer, int dest, int tag,
                                          const transport::Communicator& comm) {
  check_active("ta_ssend");
  if (!interception_enabled()) return endpoint_.ssend(buffer, dest, tag, comm);
  check_in_task("ta_ssend");
  auto request = endpoint_.isend(buffer, dest, tag, comm, transport::SendMode::Synchronous);
  return ta_wait(request);
}

transport::Status TaskAwareComm::ta_recv(std::span<std::byte> buffer, int source, int tag,
                                         const transport::Communicator& comm) {
  check_active("ta_recv");
  if (!interception_enabled()) return endpoint_.recv(buffer, source, tag, comm);
  check_in_task("ta_recv");
  auto request = endpoint_.irecv(buffer, source, tag, comm);
  return ta_wait(request);
}

transport::Status TaskAwareComm::ta_wait(transport::Request& request) {
  check_active("ta_wait");
  if (!request) throw UsageError("ta_wait: null request");
  if (!interception_enabled()) return endpoint_.wait(request);
  check_in_task("ta_wait");
  transport::Status status;
  wait_blocking({&request, 1}, {&status, 1});
  return status;
}

void TaskAwareComm::ta_waitall(std::span<transport::Request> requests,
                               std::span<transport::Status> statuses) {
  check_active("ta_waitall");
  if (!statuses.empty() && statuses.size() != requests.size()) {
    throw UsageError("ta_waitall: status count does not match request count");
  }
  if (!interception_enabled()) {
    auto st = endpoint_.waitall(requests);
    if (!statuses.empty()) std::copy(st.begin(), st.end(), statuses.begin());
    return;
  }
  check_in_task("ta_waitall");
  wait_blocking(requests, statuses);
}

void TaskAwareComm::bind_nonblocking(std::span<transport::Request> requests,
                                     std::span<transport::Status> statuses,
                                     const char* operation) {
  for (const auto& r : requests) {
    if (!r) throw UsageError(std::string(operation) + ": null or already-consumed request");
  }
  if (!statuses.empty() && statuses.size() != requests.size()) {
    throw UsageError(std::string(operation) + ": status count does not match request count");
  }
  if (!interception_enabled()) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      auto st = endpoint_.wait(requests[i]);
      if (!statuses.empty()) statuses[i] = st;
    }
    return;
  }
  check_in_task(operation);
  if (requests.empty()) return;

  auto ticket = std::make_unique<Ticket>();
  for (std::size_t i = 0; i < requests.size(); ++i) {
    transport::Status st;
    if (endpoint_.test(requests[i], &st)) {
      if (!statuses.empty()) statuses[i] = st;
      requests[i] = {};
      continue;
    }
    ticket->requests.push_back(std::exchange(requests[i], {}));
    ticket->outputs.push_back(statuses.empty() ? nullptr : &statuses[i]);
  }
  if (ticket->requests.empty()) {
    std::lock_guard lock(mutex_);
    ++metrics_.fast_path_hits;
    return;
  }
  ticket->remaining = ticket->requests.size();
  ticket->statuses.resize(ticket->requests.size());
  ticket->counter = get_current_event_counter();
  increase_current_task_event_counter(ticket->counter, 1);
  add_ticket(ticket.release());
}

void TaskAwareComm::ta_iwait(transport::Request& request, transport::Status* status) {
  check_active("ta_iwait");
  bind_nonblocking({&request, 1},
                   status ? std::span<transport::Status>(status, 1) : std::span<transport::Status>{},
                   "ta_iwait");
}

void TaskAwareComm::ta_iwaitall(std::span<transport::Request> requests,
                                std::span<transport::Status> statuses) {
  check_active("ta_iwaitall");
  bind_nonblocking(requests, statuses, "ta_iwaitall");
}

bool TaskAwareComm::drain() {
  std::vector<Ticket*> done;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < pending_.size();) {
      Ticket* t = pending_[i];
      const auto completed = endpoint_.testsome(t->requests, t->statuses);
      t->remaining -= completed.size();
      if (t->remaining == 0) {
        for (std::size_t k = 0; k < t->outputs.size(); ++k) {
          if (t->outputs[k] != nullptr) *t->outputs[k] = t->statuses[k];
        }
        if (t->blocking) {
          --paused_now_;
        } else {
          ++metrics_.events_fulfilled;
        }
        done.push_back(t);
        pending_[i] = pending_.back();
        pending_.pop_back();
      } else {
        ++i;
      }
    }
  }
  for (Ticket* t : done) {
    if (t->blocking) {
      // The ticket lives on the task's stack; it is gone once the task resumes.
      const BlockingContext ctx = std::move(t->context);
      unblock_task(ctx);
    } else {
      const EventCounterHandle counter = std::move(t->counter);
      delete t;
      decrease_task_event_counter(counter, 1);
    }
  }
  return false;
}

bool TaskAwareComm::poll_tickets(void* payload) {
  return static_cast<TaskAwareComm*>(payload)->drain();
}

void TaskAwareComm::shutdown() {
  if (shut_down_) throw UsageError("shutdown called twice");
  {
    std::lock_guard lock(mutex_);
    if (!pending_.empty()) {
      std::ostringstream os;
      os << pending_.size() << " pending ticket(s):";
      for (const Ticket* t : pending_) {
        os << " [" << (t->blocking ? "blocking" : "non-blocking") << ", " << t->remaining
           << " of " << t->requests.size() << " request(s) incomplete, ids";
        for (const auto& r : t->requests) {
          if (r) os << ' ' << r.id();
        }
        os << ']';
      }
      throw ShutdownError(os.str());
    }
  }
  if (registered_) {
    runtime_.unregister_polling_service(kServiceName, &TaskAwareComm::poll_tickets, this);
    registered_ = false;
  }
  shut_down_ = true;
}

TaskAwareMetrics TaskAwareComm::metrics() const {
  std::lock_guard lock(mutex_);
  return metrics_;
}

std::size_t TaskAwareComm::pending_tickets() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

}  // namespace taskcomm
