#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "taskcomm/runtime.hpp"
#include "taskcomm/transport/transport.hpp"

namespace taskcomm {

/// Threading levels, ordered by capability.
enum class ThreadLevel : int {
  Single = 0,
  Funneled = 1,
  Serialized = 2,
  Multiple = 3,
  TaskMultiple = 4,
};

std::string_view to_string(ThreadLevel level) noexcept;

struct TaskAwareMetrics {
  std::uint64_t tasks_paused = 0;
  std::uint64_t fast_path_hits = 0;
  std::uint64_t tickets_created = 0;
  std::uint64_t events_bound = 0;
  std::uint64_t events_fulfilled = 0;
  std::uint64_t paused_high_water = 0;
};

/// Task-aware layer over one transport endpoint.
///
/// With `TaskMultiple`, blocking operations issued from tasks pause the
/// calling task instead of its worker thread, and `ta_iwait`/`ta_iwaitall`
/// bind pending requests to the calling task's event counter. Pending
/// operations are tracked as tickets that a polling service registered on the
/// runtime drains. With any lower level every `ta_*` call is the plain
/// thread-blocking transport call.
class TaskAwareComm {
 public:
  TaskAwareComm(Runtime& runtime, transport::Endpoint& endpoint);
  ~TaskAwareComm();
  TaskAwareComm(const TaskAwareComm&) = delete;
  TaskAwareComm& operator=(const TaskAwareComm&) = delete;

  /// Negotiates the threading level and returns the provided one. Must be
  /// called once, before any communication.
  ThreadLevel init_thread(ThreadLevel requested);
  ThreadLevel provided() const noexcept { return provided_; }
  bool interception_enabled() const noexcept { return provided_ == ThreadLevel::TaskMultiple; }

  transport::Status ta_send(std::span<const std::byte> buffer, int dest, int tag,
                            const transport::Communicator& comm);
  transport::Status ta_ssend(std::span<const std::byte> buffer, int dest, int tag,
                             const transport::Communicator& comm);
  transport::Status ta_recv(std::span<std::byte> buffer, int source, int tag,
                            const transport::Communicator& comm);

  /// Blocking waits: pause the calling task until every request completes.
  transport::Status ta_wait(transport::Request& request);
  void ta_waitall(std::span<transport::Request> requests,
                  std::span<transport::Status> statuses = {});

  /// Never pauses. Consumes the requests; the calling task's dependencies are
  /// released only once they have completed. Status slots are filled before
  /// the release and must stay valid until then.
  void ta_iwait(transport::Request& request, transport::Status* status = nullptr);
  void ta_iwaitall(std::span<transport::Request> requests,
                   std::span<transport::Status> statuses = {});

  /// Unregisters the polling service. Throws ShutdownError while tickets are
  /// pending.
  void shutdown();

  TaskAwareMetrics metrics() const;
  std::size_t pending_tickets() const;
  transport::Endpoint& endpoint() noexcept { return endpoint_; }

  /// Polling service body; `payload` is the TaskAwareComm.
  static bool poll_tickets(void* payload);

 private:
  struct Ticket {
    std::vector<transport::Request> requests;
    std::vector<transport::Status> statuses;
    std::vector<transport::Status*> outputs;
    std::size_t remaining = 0;
    bool blocking = false;
    BlockingContext context;
    EventCounterHandle counter;
  };

  void check_active(const char* operation) const;
  void check_in_task(const char* operation) const;
  void add_ticket(Ticket* ticket);
  void wait_blocking(std::span<transport::Request> requests, std::span<transport::Status> statuses);
  void bind_nonblocking(std::span<transport::Request> requests,
                        std::span<transport::Status> statuses, const char* operation);
  bool drain();

  Runtime& runtime_;
  transport::Endpoint& endpoint_;
  ThreadLevel provided_ = ThreadLevel::Single;
  bool initialized_ = false;
  bool registered_ = false;
  bool shut_down_ = false;

  mutable std::mutex mutex_;
  std::vector<Ticket*> pending_;
  std::uint64_t paused_now_ = 0;
  TaskAwareMetrics metrics_;
};

}  // namespace taskcomm
