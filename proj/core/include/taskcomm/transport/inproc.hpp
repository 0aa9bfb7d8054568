#pragma once

#include <memory>
#include <vector>

#include "taskcomm/transport/transport.hpp"

namespace taskcomm::transport {

/// Ranks living in one process; envelopes move through in-memory queues on
/// the sender's thread.
class InProcWorld {
 public:
  explicit InProcWorld(int size);
  ~InProcWorld();
  InProcWorld(const InProcWorld&) = delete;
  InProcWorld& operator=(const InProcWorld&) = delete;

  int size() const noexcept { return static_cast<int>(endpoints_.size()); }
  Endpoint& endpoint(int rank);

  void abort();

 private:
  class RankEndpoint;
  std::vector<std::unique_ptr<RankEndpoint>> endpoints_;
};

}  // namespace taskcomm::transport
