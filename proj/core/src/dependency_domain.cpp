#include "dependency_domain.hpp"

#include <algorithm>

namespace taskcomm::detail {

void DependencyDomain::add(Task& task, const std::vector<DataAccess>& accesses,
                           std::vector<Task*>& predecessors) {
  const auto first = predecessors.size();
  auto depend_on = [&](Task* other) {
    if (other != nullptr && other != &task) predecessors.push_back(other);
  };

  for (const auto& access : accesses) {
    const Region& r = access.region;
    const std::uint64_t lo = r.base >= max_length_ ? r.base - max_length_ + 1 : 0;
    for (auto it = entries_.lower_bound({lo, 0}); it != entries_.end() && it->first.first < r.end();
         ++it) {
      const Region other{it->first.first, it->first.second};
      if (!other.overlaps(r)) continue;
      depend_on(it->second.last_writer);
      if (access.writes()) {
        for (Task* reader : it->second.readers) depend_on(reader);
      }
    }
  }

  for (const auto& access : accesses) {
    const Region& r = access.region;
    Entry& entry = entries_[{r.base, r.length}];
    max_length_ = std::max(max_length_, r.length);
    if (access.writes()) {
      entry.last_writer = &task;
      entry.readers.clear();
    } else if (entry.last_writer != &task &&
               std::find(entry.readers.begin(), entry.readers.end(), &task) ==
                   entry.readers.end()) {
      entry.readers.push_back(&task);
    }
  }

  std::sort(predecessors.begin() + first, predecessors.end());
  predecessors.erase(std::unique(predecessors.begin() + first, predecessors.end()),
                     predecessors.end());
}

void DependencyDomain::remove(Task& task, const std::vector<DataAccess>& accesses) {
  for (const auto& access : accesses) {
    auto it = entries_.find({access.region.base, access.region.length});
    if (it == entries_.end()) continue;
    Entry& entry = it->second;
    if (entry.last_writer == &task) entry.last_writer = nullptr;
    std::erase(entry.readers, &task);
    if (entry.last_writer == nullptr && entry.readers.empty()) entries_.erase(it);
  }
}

}  // namespace taskcomm::detail
