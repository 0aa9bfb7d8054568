#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "taskcomm/data_access.hpp"

namespace taskcomm::detail {

struct Task;

/// Tracks the unreleased accesses of sibling tasks. Each distinct region keeps
/// its last writer and the readers registered after it; a new access depends on
/// every conflicting unreleased access of every overlapping region.
///
/// Not thread-safe; guarded by the runtime's dependency lock.
class DependencyDomain {
 public:
  /// Registers `task`'s accesses and appends the distinct tasks it must wait
  /// for to `predecessors`.
  void add(Task& task, const std::vector<DataAccess>& accesses, std::vector<Task*>& predecessors);

  /// Drops every reference to `task`.
  void remove(Task& task, const std::vector<DataAccess>& accesses);

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  struct Entry {
    Task* last_writer = nullptr;
    std::vector<Task*> readers;
  };
  using Key = std::pair<std::uint64_t, std::uint64_t>;  // (base, length)

  std::map<Key, Entry> entries_;
  std::uint64_t max_length_ = 0;
};

}  // namespace taskcomm::detail
