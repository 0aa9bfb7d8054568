#include "taskcomm/transport/inproc.hpp"

#include <string>

#include "matching.hpp"

namespace taskcomm::transport {

class InProcWorld::RankEndpoint final : public Endpoint {
 public:
  RankEndpoint(InProcWorld& world, int rank, int size) : Endpoint(rank, size), world_(world) {}

  detail::MatchingEngine& engine() noexcept { return inbox(); }

 protected:
  void route(Envelope&& envelope, std::function<void()> on_matched) override {
    world_.endpoints_[static_cast<std::size_t>(envelope.dest)]->engine().deliver(
        std::move(envelope), std::move(on_matched));
  }

 private:
  InProcWorld& world_;
};

InProcWorld::InProcWorld(int size) {
  if (size <= 0) throw TransportArgumentError("world size must be positive");
  endpoints_.reserve(static_cast<std::size_t>(size));
  for (int r = 0; r < size; ++r) endpoints_.push_back(std::make_unique<RankEndpoint>(*this, r, size));
}

InProcWorld::~InProcWorld() = default;

Endpoint& InProcWorld::endpoint(int rank) {
  if (rank < 0 || rank >= size()) {
    throw TransportArgumentError("no rank " + std::to_string(rank) + " in world of size " +
                                 std::to_string(size()));
  }
  return *endpoints_[static_cast<std::size_t>(rank)];
}

void InProcWorld::abort() {
  for (auto& e : endpoints_) e->abort();
}

}  // namespace taskcomm::transport
