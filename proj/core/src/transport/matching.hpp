#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>

#include "taskcomm/transport/transport.hpp"

namespace taskcomm::transport::detail {

struct RequestState {
  std::uint64_t id = 0;
  RequestKind kind = RequestKind::Send;
  std::atomic<bool> complete{false};
  std::mutex mutex;
  std::condition_variable cv;
  Status status;         // written before `complete` is set
  bool reported = false; // testsome observer state, guarded by mutex

  // Receive side.
  std::span<std::byte> buffer;
  int source = -1;
  int tag = -1;
  int comm = 0;

  void finish(const Status& s);
};

/// Per-rank matching of incoming envelopes against posted receives: one FIFO
/// of unexpected messages and one FIFO of posted receives per
/// (source, tag, comm).
class MatchingEngine {
 public:
  using MatchCallback = std::function<void()>;

  /// Called on behalf of the sender. `on_matched` (may be empty) runs once a
  /// receive consumes the envelope, outside the engine lock.
  void deliver(Envelope&& envelope, MatchCallback on_matched);

  /// Called by the receiver.
  void post(std::shared_ptr<RequestState> receive);

  std::size_t unexpected_count() const;
  std::size_t posted_count() const;

 private:
  struct Key {
    int source;
    int tag;
    int comm;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = static_cast<std::uint32_t>(k.source);
      h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.tag);
      h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.comm);
      return static_cast<std::size_t>(h ^ (h >> 29));
    }
  };
  struct Unexpected {
    Envelope envelope;
    MatchCallback on_matched;
  };
  struct Queues {
    std::deque<Unexpected> unexpected;
    std::deque<std::shared_ptr<RequestState>> posted;
  };

  static void complete_receive(RequestState& receive, const Envelope& envelope);

  mutable std::mutex mutex_;
  std::unordered_map<Key, Queues, KeyHash> queues_;
};

}  // namespace taskcomm::transport::detail
