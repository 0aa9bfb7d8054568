#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace taskcomm {

enum class TraceEvent : std::uint8_t { Created, Start, Pause, Resume, End, Completed };

std::string_view to_string(TraceEvent event) noexcept;

struct TraceRecord {
  int rank = 0;
  int worker = -1;  // -1: not a worker thread (polling executor, external thread)
  std::string_view task_kind;
  std::uint64_t task_id = 0;
  TraceEvent event = TraceEvent::Created;
  std::int64_t timestamp_ns = 0;
  // In-memory only; not part of the CSV record.
  int iteration = -1;
};

/// Collects task lifecycle events from many threads. Each thread appends to
/// its own buffer; buffers are merged and time-sorted by `records()`.
///
/// `task_kind` must point to storage that outlives the recorder (string
/// literals in practice).
class TraceRecorder {
 public:
  TraceRecorder();
  ~TraceRecorder();
  TraceRecorder(const TraceRecorder&) = delete;
  TraceRecorder& operator=(const TraceRecorder&) = delete;

  void record(TraceRecord record);
  std::int64_t now_ns() const noexcept;

  /// Merged records ordered by timestamp. Must not race with `record`.
  std::vector<TraceRecord> records() const;

 private:
  struct Buffer {
    std::vector<TraceRecord> records;
  };
  Buffer& local_buffer();

  std::uint64_t id_;
  std::chrono::steady_clock::time_point origin_;
  mutable std::mutex mutex_;
  std::vector<std::unique_ptr<Buffer>> buffers_;
};

/// Writes the `rank,worker,task_kind,task_id,event,timestamp_ns` CSV format.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& records);

/// Largest number of tasks whose kind satisfies `is_kind` that are between
/// their Start and End events at the same instant on `rank`.
template <typename Pred>
int max_in_flight(const std::vector<TraceRecord>& records, int rank, Pred is_kind);

}  // namespace taskcomm

#include "taskcomm/trace_inl.hpp"
