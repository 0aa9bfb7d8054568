#pragma once

#include <algorithm>
#include <tuple>

namespace taskcomm {

template <typename Pred>
int max_in_flight(const std::vector<TraceRecord>& records, int rank, Pred is_kind) {
  // (timestamp, delta); ends sort before starts at equal timestamps.
  std::vector<std::pair<std::int64_t, int>> edges;
  for (const auto& r : records) {
    if (r.rank != rank || !is_kind(r.task_kind)) continue;
    if (r.event == TraceEvent::Start) edges.emplace_back(r.timestamp_ns, +1);
    if (r.event == TraceEvent::End) edges.emplace_back(r.timestamp_ns, -1);
  }
  std::sort(edges.begin(), edges.end());
  int current = 0;
  int best = 0;
  for (const auto& [ts, delta] : edges) {
    current += delta;
    best = std::max(best, current);
  }
  return best;
}

}  // namespace taskcomm
