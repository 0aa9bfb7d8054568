#include "matching.hpp"

#include <algorithm>
#include <cstring>

namespace taskcomm::transport::detail {

void RequestState::finish(const Status& s) {
  {
    std::lock_guard lock(mutex);
    status = s;
    complete.store(true, std::memory_order_release);
  }
  cv.notify_all();
}

void MatchingEngine::complete_receive(RequestState& receive, const Envelope& envelope) {
  const std::size_t n = std::min(envelope.payload.size(), receive.buffer.size());
  if (n > 0) std::memcpy(receive.buffer.data(), envelope.payload.data(), n);
  receive.finish({.source = envelope.source,
                  .tag = envelope.tag,
                  .byte_count = n,
                  .truncated = envelope.payload.size() > receive.buffer.size()});
}

void MatchingEngine::deliver(Envelope&& envelope, MatchCallback on_matched) {
  std::shared_ptr<RequestState> receive;
  {
    std::lock_guard lock(mutex_);
    auto& q = queues_[{envelope.source, envelope.tag, envelope.comm}];
    if (q.posted.empty()) {
      q.unexpected.push_back({std::move(envelope), std::move(on_matched)});
      return;
    }
    receive = std::move(q.posted.front());
    q.posted.pop_front();
  }
  complete_receive(*receive, envelope);
  if (on_matched) on_matched();
}

void MatchingEngine::post(std::shared_ptr<RequestState> receive) {
  Unexpected match;
  {
    std::lock_guard lock(mutex_);
    auto& q = queues_[{receive->source, receive->tag, receive->comm}];
    if (q.unexpected.empty()) {
      q.posted.push_back(std::move(receive));
      return;
    }
    match = std::move(q.unexpected.front());
    q.unexpected.pop_front();
  }
  complete_receive(*receive, match.envelope);
  if (match.on_matched) match.on_matched();
}

std::size_t MatchingEngine::unexpected_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, q] : queues_) n += q.unexpected.size();
  return n;
}

std::size_t MatchingEngine::posted_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, q] : queues_) n += q.posted.size();
  return n;
}

}  // namespace taskcomm::transport::detail
