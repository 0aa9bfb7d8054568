#include "taskcomm/polling.hpp"

#include <algorithm>

#include "taskcomm/error.hpp"

namespace taskcomm {

namespace {
thread_local bool tls_in_callback = false;

struct CallbackScope {
  CallbackScope() { tls_in_callback = true; }
  ~CallbackScope() { tls_in_callback = false; }
};
}  // namespace

bool PollingRegistry::in_callback() noexcept { return tls_in_callback; }

void PollingRegistry::add(std::string name, PollingFunction function, void* payload) {
  if (function == nullptr) throw UsageError("polling service '" + name + "' has no function");
  std::lock_guard lock(list_mutex_);
  for (const auto& s : services_) {
    if (s.function == function && s.payload == payload) {
      throw UsageError("polling service '" + name + "' is already registered");
    }
  }
  services_.push_back({std::move(name), function, payload});
}

void PollingRegistry::remove(std::string_view name, PollingFunction function, void* payload) {
  if (tls_in_callback) {
    throw UsageError("unregister_polling_service called from inside a polling callback");
  }
  // Holding the executor lock guarantees no invocation is in flight.
  std::lock_guard exec(executor_mutex_);
  std::lock_guard lock(list_mutex_);
  auto it = std::find_if(services_.begin(), services_.end(), [&](const Service& s) {
    return s.function == function && s.payload == payload;
  });
  if (it == services_.end()) {
    throw UsageError("polling service '" + std::string(name) + "' is not registered");
  }
  services_.erase(it);
}

bool PollingRegistry::poll(bool wait) {
  std::unique_lock exec(executor_mutex_, std::defer_lock);
  if (wait) {
    exec.lock();
  } else if (!exec.try_lock()) {
    return false;
  }

  std::vector<Service> snapshot;
  {
    std::lock_guard lock(list_mutex_);
    snapshot = services_;
  }
  for (const auto& s : snapshot) {
    bool done = false;
    {
      CallbackScope scope;
      done = s.function(s.payload);
    }
    if (done) {
      std::lock_guard lock(list_mutex_);
      std::erase_if(services_, [&](const Service& other) {
        return other.function == s.function && other.payload == s.payload;
      });
    }
  }
  rounds_.fetch_add(1, std::memory_order_relaxed);
  return true;
}

std::size_t PollingRegistry::size() const {
  std::lock_guard lock(list_mutex_);
  return services_.size();
}

std::uint64_t PollingRegistry::rounds() const { return rounds_.load(std::memory_order_relaxed); }

}  // namespace taskcomm
