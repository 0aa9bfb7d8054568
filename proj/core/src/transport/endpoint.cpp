#include <string>

#include "matching.hpp"
#include "taskcomm/transport/transport.hpp"

namespace taskcomm::transport {

namespace {
detail::RequestState& require(const std::shared_ptr<detail::RequestState>& state,
                              const char* operation) {
  if (!state) throw UsageError(std::string(operation) + ": null or consumed request");
  return *state;
}
}  // namespace

std::uint64_t Request::id() const { return require(state_, "Request::id").id; }
RequestKind Request::kind() const { return require(state_, "Request::kind").kind; }
bool Request::is_complete() const {
  return require(state_, "Request::is_complete").complete.load(std::memory_order_acquire);
}
Status Request::status() const {
  auto& s = require(state_, "Request::status");
  std::lock_guard lock(s.mutex);
  return s.status;
}

Endpoint::Endpoint(int rank, int size)
    : rank_(rank), size_(size), inbox_(std::make_unique<detail::MatchingEngine>()) {
  if (size <= 0 || rank < 0 || rank >= size) {
    throw TransportArgumentError("invalid rank " + std::to_string(rank) + " for size " +
                                 std::to_string(size));
  }
}

Endpoint::~Endpoint() = default;

Communicator Endpoint::communicator(int id) const {
  if (id < 0) throw TransportArgumentError("communicator id must be non-negative");
  return {id, size_, rank_};
}

void Endpoint::check_comm(const Communicator& comm) const {
  if (comm.id < 0 || comm.size != size_ || comm.rank != rank_) {
    throw TransportArgumentError("communicator " + std::to_string(comm.id) +
                                 " does not belong to this endpoint");
  }
}

void Endpoint::check_peer(int peer, int tag, const char* what) const {
  if (peer < 0 || peer >= size_) {
    throw TransportArgumentError(std::string("invalid ") + what + " rank " + std::to_string(peer));
  }
  if (tag < 0) throw TransportArgumentError("invalid tag " + std::to_string(tag));
}

Request Endpoint::isend(std::span<const std::byte> buffer, int dest, int tag,
                        const Communicator& comm, SendMode mode) {
  check_comm(comm);
  check_peer(dest, tag, "destination");
  if (aborted()) throw TransportAborted("transport aborted");

  auto state = std::make_shared<detail::RequestState>();
  state->id = next_request_id_.fetch_add(1);
  const bool sync = mode == SendMode::Synchronous;
  state->kind = sync ? RequestKind::Ssend : RequestKind::Send;

  Envelope envelope{.source = rank_,
                    .dest = dest,
                    .tag = tag,
                    .comm = comm.id,
                    .synchronous = sync,
                    .payload = {buffer.begin(), buffer.end()}};
  const Status sent{.source = rank_, .tag = tag, .byte_count = buffer.size(), .truncated = false};
  if (sync) {
    route(std::move(envelope), [state, sent] { state->finish(sent); });
  } else {
    route(std::move(envelope), {});
    state->finish(sent);
  }
  return Request(std::move(state));
}

Request Endpoint::irecv(std::span<std::byte> buffer, int source, int tag,
                        const Communicator& comm) {
  check_comm(comm);
  check_peer(source, tag, "source");
  if (aborted()) throw TransportAborted("transport aborted");

  auto state = std::make_shared<detail::RequestState>();
  state->id = next_request_id_.fetch_add(1);
  state->kind = RequestKind::Recv;
  state->buffer = buffer;
  state->source = source;
  state->tag = tag;
  state->comm = comm.id;
  inbox_->post(state);
  return Request(std::move(state));
}

bool Endpoint::test(const Request& request, Status* status) {
  auto& s = require(request.state_, "test");
  if (!s.complete.load(std::memory_order_acquire)) return false;
  if (status != nullptr) {
    std::lock_guard lock(s.mutex);
    *status = s.status;
  }
  return true;
}

std::vector<std::size_t> Endpoint::testsome(std::span<Request> requests,
                                            std::span<Status> statuses) {
  std::vector<std::size_t> done;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (!requests[i].state_) continue;
    auto& s = *requests[i].state_;
    if (!s.complete.load(std::memory_order_acquire)) continue;
    std::lock_guard lock(s.mutex);
    if (s.reported) continue;
    s.reported = true;
    if (i < statuses.size()) statuses[i] = s.status;
    done.push_back(i);
  }
  return done;
}

Status Endpoint::wait(Request& request) {
  auto state = request.state_;
  auto& s = require(state, "wait");
  if (!s.complete.load(std::memory_order_acquire)) {
    {
      std::lock_guard w(waiters_mutex_);
      waiters_.insert(&s);
    }
    bool completed = false;
    {
      std::unique_lock lock(s.mutex);
      s.cv.wait(lock, [&] { return s.complete.load(std::memory_order_acquire) || aborted(); });
      completed = s.complete.load(std::memory_order_acquire);
    }
    {
      std::lock_guard w(waiters_mutex_);
      waiters_.erase(&s);
    }
    if (!completed) {
      throw TransportAborted("transport aborted while waiting for request " +
                             std::to_string(s.id));
    }
  }
  request.state_.reset();
  std::lock_guard lock(s.mutex);
  return s.status;
}

std::vector<Status> Endpoint::waitall(std::span<Request> requests) {
  std::vector<Status> statuses;
  statuses.reserve(requests.size());
  for (auto& r : requests) statuses.push_back(r ? wait(r) : Status{});
  return statuses;
}

Status Endpoint::send(std::span<const std::byte> buffer, int dest, int tag,
                      const Communicator& comm) {
  auto request = isend(buffer, dest, tag, comm, SendMode::Standard);
  return wait(request);
}

Status Endpoint::ssend(std::span<const std::byte> buffer, int dest, int tag,
                       const Communicator& comm) {
  auto request = isend(buffer, dest, tag, comm, SendMode::Synchronous);
  return wait(request);
}

Status Endpoint::recv(std::span<std::byte> buffer, int source, int tag, const Communicator& comm) {
  auto request = irecv(buffer, source, tag, comm);
  return wait(request);
}

void Endpoint::abort() {
  aborted_.store(true, std::memory_order_release);
  std::lock_guard w(waiters_mutex_);
  for (auto* s : waiters_) {
    { std::lock_guard lock(s->mutex); }
    s->cv.notify_all();
  }
}

std::size_t Endpoint::unexpected_messages() const { return inbox_->unexpected_count(); }
std::size_t Endpoint::posted_receives() const { return inbox_->posted_count(); }

}  // namespace taskcomm::transport
