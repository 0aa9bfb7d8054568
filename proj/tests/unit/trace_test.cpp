#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "taskcomm/runtime.hpp"
#include "taskcomm/trace.hpp"

using namespace taskcomm;

TEST(Trace, CsvFormat) {
  std::vector<TraceRecord> records{
      {.rank = 1, .worker = 0, .task_kind = "compute", .task_id = 7, .event = TraceEvent::Start,
       .timestamp_ns = 100},
      {.rank = 1, .worker = -1, .task_kind = "recv_top", .task_id = 8,
       .event = TraceEvent::Completed, .timestamp_ns = 250},
  };
  std::ostringstream os;
  write_trace_csv(os, records);
  EXPECT_EQ(os.str(),
            "rank,worker,task_kind,task_id,event,timestamp_ns\n"
            "1,0,compute,7,start,100\n"
            "1,-1,recv_top,8,completed,250\n");
}

TEST(Trace, MaxInFlightCountsOverlapsPerRank) {
  auto rec = [](int rank, std::uint64_t id, TraceEvent e, std::int64_t ts) {
    return TraceRecord{.rank = rank, .worker = 0, .task_kind = "comm", .task_id = id, .event = e,
                       .timestamp_ns = ts};
  };
  std::vector<TraceRecord> r{
      rec(0, 1, TraceEvent::Start, 0),  rec(0, 1, TraceEvent::End, 10),
      rec(0, 2, TraceEvent::Start, 10), rec(0, 2, TraceEvent::End, 20),  // touching, not overlapping
      rec(0, 3, TraceEvent::Start, 15), rec(0, 3, TraceEvent::End, 30),
      rec(1, 4, TraceEvent::Start, 0),  rec(1, 4, TraceEvent::End, 100),
  };
  auto any = [](std::string_view) { return true; };
  EXPECT_EQ(max_in_flight(r, 0, any), 2);
  EXPECT_EQ(max_in_flight(r, 1, any), 1);
  EXPECT_EQ(max_in_flight(r, 2, any), 0);
}

TEST(Trace, RecordsFromManyThreadsAreMergedInTimeOrder) {
  TraceRecorder recorder;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) {
        recorder.record({.rank = t, .worker = t, .task_kind = "x",
                         .task_id = static_cast<std::uint64_t>(i), .event = TraceEvent::Start,
                         .timestamp_ns = recorder.now_ns()});
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto all = recorder.records();
  ASSERT_EQ(all.size(), 400u);
  for (std::size_t i = 1; i < all.size(); ++i) {
    ASSERT_LE(all[i - 1].timestamp_ns, all[i].timestamp_ns);
  }
}

TEST(Trace, PausedTaskLifecycle) {
  TraceRecorder recorder;
  RuntimeConfig cfg;
  cfg.workers = 1;
  cfg.rank = 3;
  cfg.trace = &recorder;
  Runtime rt(cfg);
  TaskId id{};
  rt.run([&] {
    id = spawn_task(
        [] {
          auto ctx = get_current_blocking_context();
          spawn_task([ctx] { unblock_task(ctx); });
          block_current_task(ctx);
        },
        {}, {.kind = "pausing", .iteration = 5});
  });
  std::vector<TraceEvent> events;
  for (const auto& r : recorder.records()) {
    if (r.task_id != static_cast<std::uint64_t>(id)) continue;
    EXPECT_EQ(r.rank, 3);
    EXPECT_EQ(r.task_kind, "pausing");
    EXPECT_EQ(r.iteration, 5);
    events.push_back(r.event);
  }
  EXPECT_EQ(events, (std::vector<TraceEvent>{TraceEvent::Created, TraceEvent::Start,
                                             TraceEvent::Pause, TraceEvent::Resume,
                                             TraceEvent::End, TraceEvent::Completed}));
}
