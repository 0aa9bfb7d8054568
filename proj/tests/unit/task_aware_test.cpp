#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "taskcomm/task_aware.hpp"
#include "taskcomm/transport/inproc.hpp"

using namespace taskcomm;
using namespace taskcomm::transport;
using namespace std::chrono_literals;

namespace {

std::span<std::byte> bytes(std::vector<int>& v) { return std::as_writable_bytes(std::span<int>(v)); }

RuntimeConfig one_worker() {
  RuntimeConfig c;
  c.workers = 1;
  return c;
}

template <typename Pred>
bool spin_until(Pred pred, std::chrono::milliseconds limit = 5s) {
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (!pred()) {
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(100us);
  }
  return true;
}

}  // namespace

TEST(ThreadLevel, TaskMultipleIsAboveMultiple) {
  EXPECT_GT(ThreadLevel::TaskMultiple, ThreadLevel::Multiple);
  EXPECT_GT(static_cast<int>(ThreadLevel::TaskMultiple), static_cast<int>(ThreadLevel::Multiple));
  EXPECT_LT(ThreadLevel::Single, ThreadLevel::Funneled);
}

TEST(TaskAware, InitThreadProvidesTheRequestedLevel) {
  InProcWorld world(1);
  Runtime rt(one_worker());
  TaskAwareComm a(rt, world.endpoint(0));
  EXPECT_EQ(a.init_thread(ThreadLevel::TaskMultiple), ThreadLevel::TaskMultiple);
  EXPECT_TRUE(a.interception_enabled());
  EXPECT_THROW(a.init_thread(ThreadLevel::TaskMultiple), UsageError);

  TaskAwareComm b(rt, world.endpoint(0));
  EXPECT_EQ(b.init_thread(ThreadLevel::Multiple), ThreadLevel::Multiple);
  EXPECT_FALSE(b.interception_enabled());
}

TEST(TaskAware, CallsBeforeInitAreUsageErrors) {
  InProcWorld world(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, world.endpoint(0));
  std::vector<int> v(1);
  EXPECT_THROW(tac.ta_recv(bytes(v), 0, 0, world.endpoint(0).world()), UsageError);
}

TEST(TaskAware, InterceptedCallOutsideTaskIsAUsageError) {
  InProcWorld world(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, world.endpoint(0));
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> v(1);
  EXPECT_THROW(tac.ta_recv(bytes(v), 0, 0, world.endpoint(0).world()), UsageError);
  Request r = world.endpoint(0).irecv(bytes(v), 0, 0, world.endpoint(0).world());
  EXPECT_THROW(tac.ta_iwait(r), UsageError);
}

TEST(TaskAware, ReceiveOfWaitingMessageTakesTheFastPath) {
  InProcWorld world(1);
  auto& ep = world.endpoint(0);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> out{4, 2};
  ep.send(bytes(out), 0, 1, ep.world());
  std::vector<int> in(2);
  Status st;
  rt.run([&] { spawn_task([&] { st = tac.ta_recv(bytes(in), 0, 1, ep.world()); }); });
  EXPECT_EQ(in, out);
  EXPECT_EQ(st.byte_count, 8u);
  EXPECT_EQ(tac.metrics().tasks_paused, 0u);
  EXPECT_EQ(tac.metrics().fast_path_hits, 1u);
  EXPECT_EQ(rt.stats().pauses, 0u);
  tac.shutdown();
}

TEST(TaskAware, SsendAndRecvOnOneWorkerComplete) {
  InProcWorld world(1);
  auto& ep = world.endpoint(0);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> out{1, 2, 3};
  std::vector<int> in(3);
  rt.run([&] {
    spawn_task([&] { tac.ta_ssend(bytes(out), 0, 0, ep.world()); });
    spawn_task([&] { tac.ta_recv(bytes(in), 0, 0, ep.world()); });
  });
  EXPECT_EQ(in, out);
  EXPECT_EQ(tac.metrics().tasks_paused, 1u);
  EXPECT_EQ(tac.metrics().paused_high_water, 1u);
  tac.shutdown();
}

TEST(TaskAware, DisabledInterceptionBehavesLikeTransportRecv) {
  InProcWorld world(2);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, world.endpoint(1));
  tac.init_thread(ThreadLevel::Multiple);
  std::thread sender([&] {
    std::this_thread::sleep_for(10ms);
    std::vector<int> out{77};
    world.endpoint(0).send(bytes(out), 1, 0, world.endpoint(0).world());
  });
  std::vector<int> in(1);
  rt.run([&] {
    spawn_task([&] { tac.ta_recv(bytes(in), 0, 0, world.endpoint(1).world()); });
  });
  sender.join();
  EXPECT_EQ(in[0], 77);
  EXPECT_EQ(tac.metrics().tickets_created, 0u);
  tac.shutdown();
}

TEST(TaskAware, IwaitOnCompletedRequestLeavesCounterAtBase) {
  InProcWorld world(1);
  auto& ep = world.endpoint(0);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> v{1};
  std::uint64_t count_after = 99;
  rt.run([&] {
    Request s = ep.isend(bytes(v), 0, 0, ep.world());
    tac.ta_iwait(s);
    EXPECT_FALSE(s.valid());
    count_after = Runtime::current()->inspect(current_task_id())->event_count;
    std::vector<int> in(1);
    ep.recv(bytes(in), 0, 0, ep.world());
  });
  EXPECT_EQ(count_after, 1u);
  EXPECT_EQ(tac.metrics().events_bound, 0u);
  EXPECT_EQ(tac.metrics().fast_path_hits, 1u);
  tac.shutdown();
}

TEST(TaskAware, PendingIwaitDefersReleaseUntilDelivery) {
  InProcWorld world(2);
  auto& ep = world.endpoint(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> in(1);
  std::atomic<std::uint64_t> producer{0};
  std::atomic<bool> consumer_ran{false};
  std::atomic<bool> sent{false};
  int consumed = 0;
  std::uint64_t count_after_bind = 0;
  TaskState state_before_send = TaskState::Created;

  std::thread sender([&] {
    spin_until([&] { return producer.load() != 0; });
    const TaskId id{producer.load()};
    spin_until([&] { return rt.inspect(id)->state == TaskState::ExecutionFinished; });
    std::this_thread::sleep_for(10ms);
    state_before_send = rt.inspect(id)->state;
    EXPECT_FALSE(consumer_ran.load());
    std::vector<int> out{123};
    sent = true;
    world.endpoint(0).send(bytes(out), 1, 0, world.endpoint(0).world());
  });

  rt.run([&] {
    const TaskId id = spawn_task(
        [&] {
          Request r = ep.irecv(bytes(in), 0, 0, ep.world());
          tac.ta_iwait(r);
          count_after_bind = Runtime::current()->inspect(current_task_id())->event_count;
        },
        {DataAccess::out(0, 4)});
    producer = static_cast<std::uint64_t>(id);
    spawn_task(
        [&] {
          consumer_ran = true;
          EXPECT_TRUE(sent.load());
          consumed = in[0];
        },
        {DataAccess::in(0, 4)});
  });
  sender.join();
  EXPECT_EQ(count_after_bind, 2u);
  EXPECT_EQ(state_before_send, TaskState::ExecutionFinished);
  EXPECT_EQ(consumed, 123);
  EXPECT_EQ(tac.metrics().events_bound, 1u);
  EXPECT_EQ(tac.metrics().events_fulfilled, 1u);
  EXPECT_EQ(tac.metrics().tasks_paused, 0u);
  tac.shutdown();
}

TEST(TaskAware, IwaitallGatesTheConsumerOnAllRequests) {
  InProcWorld world(2);
  auto& e0 = world.endpoint(0);
  auto& e1 = world.endpoint(1);
  Runtime rt0(one_worker());
  Runtime rt1(one_worker());
  TaskAwareComm t0(rt0, e0);
  TaskAwareComm t1(rt1, e1);
  t0.init_thread(ThreadLevel::TaskMultiple);
  t1.init_thread(ThreadLevel::TaskMultiple);

  auto exchange = [](Runtime& rt, TaskAwareComm& tac, Endpoint& ep, int peer, int& result) {
    std::vector<int> out{ep.rank() + 10};
    std::vector<int> in(1);
    rt.run([&] {
      spawn_task(
          [&] {
            std::array<Request, 2> rs{ep.isend(bytes(out), peer, 0, ep.world()),
                                      ep.irecv(bytes(in), peer, 0, ep.world())};
            tac.ta_iwaitall(rs);
          },
          {DataAccess::out(0, 4)});
      spawn_task([&] { result = in[0]; }, {DataAccess::in(0, 4)});
    });
  };
  int r0 = 0;
  int r1 = 0;
  std::thread other([&] { exchange(rt1, t1, e1, 0, r1); });
  exchange(rt0, t0, e0, 1, r0);
  other.join();
  EXPECT_EQ(r0, 11);
  EXPECT_EQ(r1, 10);
  EXPECT_EQ(t0.metrics().events_bound, t0.metrics().events_fulfilled);
  EXPECT_LE(t0.metrics().events_bound, 1u);
  t0.shutdown();
  t1.shutdown();
}

TEST(TaskAware, IwaitallEdgeCases) {
  InProcWorld world(1);
  auto& ep = world.endpoint(0);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  rt.run([&] {
    tac.ta_iwaitall({});
    std::vector<int> v{1};
    std::vector<int> in(1);
    std::array<Request, 2> done{ep.isend(bytes(v), 0, 0, ep.world()),
                                ep.irecv(bytes(in), 0, 0, ep.world())};
    std::array<Status, 2> statuses;
    tac.ta_iwaitall(done, statuses);
    EXPECT_EQ(statuses[1].byte_count, 4u);
    EXPECT_EQ(Runtime::current()->inspect(current_task_id())->event_count, 1u);
    EXPECT_THROW(tac.ta_iwaitall(done), UsageError);
    EXPECT_THROW(tac.ta_iwait(done[0]), UsageError);
  });
  EXPECT_EQ(tac.metrics().events_bound, 0u);
  tac.shutdown();
}

TEST(TaskAware, PollWithPartialCompletionKeepsTheTicket) {
  InProcWorld world(2);
  auto& ep = world.endpoint(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<std::vector<int>> in(3, std::vector<int>(1));
  std::atomic<bool> bound{false};
  std::atomic<bool> finish{false};

  std::thread driver([&] {
    spin_until([&] { return bound.load(); });
    std::vector<int> v{1};
    world.endpoint(0).send(bytes(v), 1, 0, world.endpoint(0).world());
    world.endpoint(0).send(bytes(v), 1, 1, world.endpoint(0).world());
    std::this_thread::sleep_for(30ms);
    EXPECT_EQ(tac.pending_tickets(), 1u);
    EXPECT_EQ(tac.metrics().events_fulfilled, 0u);
    world.endpoint(0).send(bytes(v), 1, 2, world.endpoint(0).world());
    finish = true;
  });
  rt.run([&] {
    spawn_task([&] {
      std::array<Request, 3> rs;
      for (int i = 0; i < 3; ++i) {
        rs[static_cast<std::size_t>(i)] =
            ep.irecv(bytes(in[static_cast<std::size_t>(i)]), 0, i, ep.world());
      }
      tac.ta_iwaitall(rs);
      bound = true;
    });
  });
  driver.join();
  EXPECT_EQ(tac.pending_tickets(), 0u);
  EXPECT_EQ(tac.metrics().events_fulfilled, 1u);
  tac.shutdown();
}

TEST(TaskAware, PollWithNoTicketsReturnsFalse) {
  InProcWorld world(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, world.endpoint(0));
  tac.init_thread(ThreadLevel::TaskMultiple);
  EXPECT_FALSE(TaskAwareComm::poll_tickets(&tac));
}

TEST(TaskAware, ShutdownLifecycle) {
  InProcWorld world(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, world.endpoint(0));
  tac.init_thread(ThreadLevel::TaskMultiple);
  tac.shutdown();
  EXPECT_THROW(tac.shutdown(), UsageError);
  std::vector<int> v(1);
  EXPECT_THROW(tac.ta_recv(bytes(v), 0, 0, world.endpoint(0).world()), UsageError);
}

TEST(TaskAware, ShutdownReportsALeakedTicket) {
  InProcWorld world(2);
  auto& ep = world.endpoint(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, ep);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> in(1);
  std::atomic<bool> bound{false};
  std::string message;

  std::thread runner([&] {
    rt.run([&] {
      spawn_task([&] {
        Request r = ep.irecv(bytes(in), 0, 0, ep.world());
        tac.ta_iwait(r);
        bound = true;
      });
    });
  });
  ASSERT_TRUE(spin_until([&] { return bound.load(); }));
  try {
    tac.shutdown();
    ADD_FAILURE() << "shutdown accepted a pending ticket";
  } catch (const ShutdownError& e) {
    message = e.what();
  }
  EXPECT_NE(message.find("1 pending ticket"), std::string::npos) << message;

  std::vector<int> v{5};
  world.endpoint(0).send(bytes(v), 1, 0, world.endpoint(0).world());
  runner.join();
  EXPECT_NO_THROW(tac.shutdown());
}

TEST(TaskAware, BlockingAndNonBlockingModesCoexist) {
  InProcWorld world(2);
  auto& e0 = world.endpoint(0);
  auto& e1 = world.endpoint(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, e1);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> a(1);
  std::vector<int> b(1);
  int sum = 0;
  std::thread sender([&] {
    std::this_thread::sleep_for(10ms);
    std::vector<int> x{3};
    std::vector<int> y{4};
    e0.send(bytes(x), 1, 0, e0.world());
    e0.send(bytes(y), 1, 1, e0.world());
  });
  rt.run([&] {
    spawn_task([&] { tac.ta_recv(bytes(a), 0, 0, e1.world()); }, {DataAccess::out(0, 4)});
    spawn_task(
        [&] {
          Request r = e1.irecv(bytes(b), 0, 1, e1.world());
          tac.ta_iwait(r);
        },
        {DataAccess::out(4, 4)});
    spawn_task([&] { sum = a[0] + b[0]; }, {DataAccess::in(0, 8)});
  });
  sender.join();
  EXPECT_EQ(sum, 7);
  tac.shutdown();
}

TEST(TaskAware, BlockingWaitallPausesUntilAllComplete) {
  InProcWorld world(2);
  auto& e1 = world.endpoint(1);
  Runtime rt(one_worker());
  TaskAwareComm tac(rt, e1);
  tac.init_thread(ThreadLevel::TaskMultiple);
  std::vector<int> a(1);
  std::vector<int> b(1);
  std::array<Status, 2> st;
  std::thread sender([&] {
    std::this_thread::sleep_for(10ms);
    std::vector<int> x{1};
    world.endpoint(0).send(bytes(x), 1, 5, world.endpoint(0).world());
    std::this_thread::sleep_for(10ms);
    world.endpoint(0).send(bytes(x), 1, 6, world.endpoint(0).world());
  });
  rt.run([&] {
    std::array<Request, 2> rs{e1.irecv(bytes(a), 0, 5, e1.world()),
                              e1.irecv(bytes(b), 0, 6, e1.world())};
    tac.ta_waitall(rs, st);
    EXPECT_FALSE(rs[0].valid());
    EXPECT_FALSE(rs[1].valid());
  });
  sender.join();
  EXPECT_EQ(st[0].tag, 5);
  EXPECT_EQ(st[1].tag, 6);
  EXPECT_EQ(tac.metrics().tasks_paused, 1u);
  tac.shutdown();
}
