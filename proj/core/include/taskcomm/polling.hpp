#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace taskcomm {

/// Polling callback. Returning true unregisters the (function, payload) pair.
using PollingFunction = bool (*)(void* payload);

/// Registered polling services and their serialized executor.
///
/// Invocations never overlap: the periodic executor takes the executor lock,
/// opportunistic callers only try it.
class PollingRegistry {
 public:
  void add(std::string name, PollingFunction function, void* payload);

  /// Blocks until no invocation of the pair is in progress; none starts after
  /// the call returns. Throws UsageError if the pair is not registered, or if
  /// called from inside a polling callback.
  void remove(std::string_view name, PollingFunction function, void* payload);

  /// Invokes every service once, in registration order. With `wait` false,
  /// returns false without polling when another thread holds the executor.
  bool poll(bool wait);

  std::size_t size() const;
  std::uint64_t rounds() const;

  static bool in_callback() noexcept;

 private:
  struct Service {
    std::string name;
    PollingFunction function;
    void* payload;
  };

  mutable std::mutex list_mutex_;
  std::vector<Service> services_;
  std::mutex executor_mutex_;
  std::atomic<std::uint64_t> rounds_{0};
};

}  // namespace taskcomm
