#pragma once

#include <cstdint>
#include <ostream>

namespace taskcomm {

/// Half-open byte interval [base, base + length) in an abstract address space.
struct Region {
  std::uint64_t base = 0;
  std::uint64_t length = 0;

  std::uint64_t end() const noexcept { return base + length; }

  bool overlaps(const Region& other) const noexcept {
    return base < other.end() && other.base < end();
  }

  friend bool operator==(const Region&, const Region&) = default;
};

enum class AccessMode : std::uint8_t { In, Out, InOut };

struct DataAccess {
  Region region;
  AccessMode mode = AccessMode::In;

  static DataAccess in(std::uint64_t base, std::uint64_t length) {
    return {{base, length}, AccessMode::In};
  }
  static DataAccess out(std::uint64_t base, std::uint64_t length) {
    return {{base, length}, AccessMode::Out};
  }
  static DataAccess inout(std::uint64_t base, std::uint64_t length) {
    return {{base, length}, AccessMode::InOut};
  }

  /// Region of a real object, addressed by its bytes.
  template <typename T>
  static DataAccess of(const T& object, AccessMode mode) {
    return {{reinterpret_cast<std::uintptr_t>(&object), sizeof(T)}, mode};
  }

  bool writes() const noexcept { return mode != AccessMode::In; }

  friend bool operator==(const DataAccess&, const DataAccess&) = default;
};

/// Two accesses conflict iff their regions overlap and one of them writes.
bool conflicts(const DataAccess& a, const DataAccess& b) noexcept;

/// Throws InvalidAccessError for an empty region.
void validate(const DataAccess& access);

std::ostream& operator<<(std::ostream& os, AccessMode mode);

}  // namespace taskcomm
