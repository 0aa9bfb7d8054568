#pragma once

#include <chrono>

#include "taskcomm/task_aware.hpp"

namespace taskcomm::demo {

struct DeadlockDemoOptions {
  bool interop = true;
  std::chrono::milliseconds watchdog{5000};
  std::chrono::microseconds polling_period{1000};
};

struct DeadlockDemoResult {
  bool completed = false;
  bool watchdog_fired = false;
  double elapsed_s = 0.0;
  TaskAwareMetrics metrics;  // summed over both ranks
};

/// Two in-process ranks with one worker each. On every rank a task issues a
/// synchronous send to the peer and a second task then posts the matching
/// receive. With interop the first task pauses and the worker runs the
/// receiver; without it the only worker blocks inside the send and the
/// program hangs until the watchdog aborts the transport.
DeadlockDemoResult run_deadlock_demo(const DeadlockDemoOptions& options = {});

}  // namespace taskcomm::demo
