#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_set>
#include <vector>

#include "taskcomm/error.hpp"

namespace taskcomm::transport {

namespace detail {
struct RequestState;
class MatchingEngine;
}  // namespace detail

/// A group of ranks that can exchange messages. Messages sent on one
/// communicator id are never matched by receives on another.
struct Communicator {
  int id = 0;
  int size = 0;
  int rank = 0;

  friend bool operator==(const Communicator&, const Communicator&) = default;
};

struct Status {
  int source = -1;
  int tag = -1;
  std::size_t byte_count = 0;
  bool truncated = false;
};

enum class RequestKind : std::uint8_t { Send, Ssend, Recv };

enum class SendMode : std::uint8_t {
  Standard,     // completes once the payload is buffered (eager)
  Synchronous,  // completes once a matching receive has been posted
};

/// Handle to a non-blocking operation. Default-constructed and consumed
/// handles are null.
class Request {
 public:
  Request() = default;

  bool valid() const noexcept { return state_ != nullptr; }
  explicit operator bool() const noexcept { return valid(); }

  std::uint64_t id() const;
  RequestKind kind() const;
  /// Completion flag; does not change any observer state.
  bool is_complete() const;
  /// Valid once complete.
  Status status() const;

 private:
  friend class Endpoint;
  explicit Request(std::shared_ptr<detail::RequestState> state) : state_(std::move(state)) {}

  std::shared_ptr<detail::RequestState> state_;
};

/// Wire-level message.
struct Envelope {
  int source = 0;
  int dest = 0;
  int tag = 0;
  int comm = 0;
  bool synchronous = false;
  std::vector<std::byte> payload;
};

/// One rank's access to the message-passing layer. Matching is exact on
/// (source, tag, communicator); messages between a pair of ranks with the
/// same tag and communicator are received in the order they were sent.
///
/// All operations are thread-safe. Blocking operations block the calling OS
/// thread only.
class Endpoint {
 public:
  virtual ~Endpoint();
  Endpoint(const Endpoint&) = delete;
  Endpoint& operator=(const Endpoint&) = delete;

  int rank() const noexcept { return rank_; }
  int size() const noexcept { return size_; }
  Communicator world() const noexcept { return {0, size_, rank_}; }
  Communicator communicator(int id) const;

  Request isend(std::span<const std::byte> buffer, int dest, int tag, const Communicator& comm,
                SendMode mode = SendMode::Standard);
  Request irecv(std::span<std::byte> buffer, int source, int tag, const Communicator& comm);

  /// Non-blocking completion check. Throws UsageError on a null request.
  bool test(const Request& request, Status* status = nullptr);

  /// Indices of requests that completed since the previous `testsome` over
  /// them; each completion is reported once. Null requests are skipped.
  std::vector<std::size_t> testsome(std::span<Request> requests, std::span<Status> statuses = {});

  /// Blocks until complete, then consumes (nulls) the request.
  Status wait(Request& request);
  std::vector<Status> waitall(std::span<Request> requests);

  Status send(std::span<const std::byte> buffer, int dest, int tag, const Communicator& comm);
  Status ssend(std::span<const std::byte> buffer, int dest, int tag, const Communicator& comm);
  Status recv(std::span<std::byte> buffer, int source, int tag, const Communicator& comm);

  /// Fails every current and future blocking wait with TransportAborted.
  void abort();
  bool aborted() const noexcept { return aborted_.load(std::memory_order_acquire); }

  std::size_t unexpected_messages() const;
  std::size_t posted_receives() const;

 protected:
  Endpoint(int rank, int size);

  /// Delivers `envelope` to rank `envelope.dest`. For synchronous sends
  /// `on_matched` must run once the destination matched the message.
  virtual void route(Envelope&& envelope, std::function<void()> on_matched) = 0;

  detail::MatchingEngine& inbox() noexcept { return *inbox_; }

 private:
  void check_comm(const Communicator& comm) const;
  void check_peer(int peer, int tag, const char* what) const;

  int rank_;
  int size_;
  std::unique_ptr<detail::MatchingEngine> inbox_;
  std::atomic<bool> aborted_{false};
  std::atomic<std::uint64_t> next_request_id_{1};
  std::mutex waiters_mutex_;
  std::unordered_set<detail::RequestState*> waiters_;
};

template <typename T>
std::span<const std::byte> bytes_of(std::span<const T> values) {
  return std::as_bytes(values);
}

template <typename T>
std::span<std::byte> writable_bytes_of(std::span<T> values) {
  return std::as_writable_bytes(values);
}

}  // namespace taskcomm::transport
