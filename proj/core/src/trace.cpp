#include "taskcomm/trace.hpp"

#include <algorithm>
#include <atomic>

namespace taskcomm {

namespace {
std::atomic<std::uint64_t> next_recorder_id{1};

struct LocalCache {
  std::uint64_t recorder = 0;
  void* buffer = nullptr;
};
thread_local LocalCache tls_cache;
}  // namespace

std::string_view to_string(TraceEvent event) noexcept {
  switch (event) {
    case TraceEvent::Created: return "created";
    case TraceEvent::Start: return "start";
    case TraceEvent::Pause: return "pause";
    case TraceEvent::Resume: return "resume";
    case TraceEvent::End: return "end";
    case TraceEvent::Completed: return "completed";
  }
  return "unknown";
}

TraceRecorder::TraceRecorder()
    : id_(next_recorder_id.fetch_add(1)), origin_(std::chrono::steady_clock::now()) {}

TraceRecorder::~TraceRecorder() = default;

std::int64_t TraceRecorder::now_ns() const noexcept {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              origin_)
      .count();
}

// Not inlined: tasks may migrate between threads across a context switch and
// the thread-local lookup must be redone on every call.
[[gnu::noinline]] TraceRecorder::Buffer& TraceRecorder::local_buffer() {
  if (tls_cache.recorder == id_) return *static_cast<Buffer*>(tls_cache.buffer);
  std::lock_guard lock(mutex_);
  buffers_.push_back(std::make_unique<Buffer>());
  tls_cache = {id_, buffers_.back().get()};
  return *buffers_.back();
}

void TraceRecorder::record(TraceRecord record) {
  if (record.timestamp_ns == 0) record.timestamp_ns = now_ns();
  local_buffer().records.push_back(record);
}

std::vector<TraceRecord> TraceRecorder::records() const {
  std::vector<TraceRecord> merged;
  std::lock_guard lock(mutex_);
  for (const auto& b : buffers_) merged.insert(merged.end(), b->records.begin(), b->records.end());
  std::stable_sort(merged.begin(), merged.end(), [](const TraceRecord& a, const TraceRecord& b) {
    return a.timestamp_ns < b.timestamp_ns;
  });
  return merged;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& records) {
  os << "rank,worker,task_kind,task_id,event,timestamp_ns\n";
  for (const auto& r : records) {
    os << r.rank << ',' << r.worker << ',' << r.task_kind << ',' << r.task_id << ','
       << to_string(r.event) << ',' << r.timestamp_ns << '\n';
  }
}

}  // namespace taskcomm
