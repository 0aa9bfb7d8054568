#include "taskcomm/demo.hpp"

#include <array>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include "taskcomm/transport/inproc.hpp"

namespace taskcomm::demo {

namespace {
constexpr int kRanks = 2;
constexpr int kTag = 7;
constexpr std::string_view kSendKind = "ssend";
constexpr std::string_view kRecvKind = "recv";
}  // namespace

DeadlockDemoResult run_deadlock_demo(const DeadlockDemoOptions& options) {
  transport::InProcWorld world(kRanks);
  DeadlockDemoResult result;
  std::mutex mutex;
  std::condition_variable cv;
  int finished = 0;
  bool all_ok = true;

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> ranks;
  for (int r = 0; r < kRanks; ++r) {
    ranks.emplace_back([&, r] {
      auto& ep = world.endpoint(r);
      RuntimeConfig rc;
      rc.workers = 1;
      rc.polling_period = options.polling_period;
      rc.rank = r;
      Runtime runtime(rc);
      TaskAwareComm tac(runtime, ep);
      tac.init_thread(options.interop ? ThreadLevel::TaskMultiple : ThreadLevel::Multiple);
      const int peer = 1 - r;
      std::array<int, 4> out{r, r + 1, r + 2, r + 3};
      std::array<int, 4> in{};
      bool ok = true;
      try {
        runtime.run([&] {
          spawn_task(
              [&] { tac.ta_ssend(std::as_bytes(std::span<const int>(out)), peer, kTag, ep.world()); },
              {}, {.kind = kSendKind});
          spawn_task(
              [&] { tac.ta_recv(std::as_writable_bytes(std::span<int>(in)), peer, kTag, ep.world()); },
              {}, {.kind = kRecvKind});
        });
        ok = in == std::array<int, 4>{peer, peer + 1, peer + 2, peer + 3};
        tac.shutdown();
      } catch (const Error&) {
        ok = false;
      }
      std::lock_guard lock(mutex);
      all_ok = all_ok && ok;
      const auto m = tac.metrics();
      result.metrics.tasks_paused += m.tasks_paused;
      result.metrics.fast_path_hits += m.fast_path_hits;
      result.metrics.tickets_created += m.tickets_created;
      result.metrics.events_bound += m.events_bound;
      result.metrics.events_fulfilled += m.events_fulfilled;
      ++finished;
      cv.notify_all();
    });
  }

  {
    std::unique_lock lock(mutex);
    if (!cv.wait_for(lock, options.watchdog, [&] { return finished == kRanks; })) {
      result.watchdog_fired = true;
      lock.unlock();
      world.abort();
    }
  }
  for (auto& t : ranks) t.join();
  result.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.completed = !result.watchdog_fired && all_ok;
  return result;
}

}  // namespace taskcomm::demo
