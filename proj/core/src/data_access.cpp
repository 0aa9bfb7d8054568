#include "taskcomm/data_access.hpp"

#include "taskcomm/error.hpp"

namespace taskcomm {

bool conflicts(const DataAccess& a, const DataAccess& b) noexcept {
  return a.region.overlaps(b.region) && (a.writes() || b.writes());
}

void validate(const DataAccess& access) {
  if (access.region.length == 0) {
    throw InvalidAccessError("data access with zero-length region at base " +
                             std::to_string(access.region.base));
  }
}

std::ostream& operator<<(std::ostream& os, AccessMode mode) {
  switch (mode) {
    case AccessMode::In: return os << "in";
    case AccessMode::Out: return os << "out";
    case AccessMode::InOut: return os << "inout";
  }
  return os;
}

}  // namespace taskcomm
