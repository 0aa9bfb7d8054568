#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "taskcomm/data_access.hpp"
#include "taskcomm/error.hpp"

using namespace taskcomm;

TEST(DataAccess, ConflictRequiresOverlapAndAWriter) {
  const auto in_a = DataAccess::in(0, 8);
  const auto in_b = DataAccess::in(4, 8);
  const auto out_b = DataAccess::out(4, 8);
  const auto inout_far = DataAccess::inout(100, 8);
  EXPECT_FALSE(conflicts(in_a, in_b));
  EXPECT_TRUE(conflicts(in_a, out_b));
  EXPECT_TRUE(conflicts(out_b, in_a));
  EXPECT_FALSE(conflicts(out_b, inout_far));
}

TEST(DataAccess, AdjacentRegionsDoNotOverlap) {
  EXPECT_FALSE((Region{0, 4}.overlaps(Region{4, 4})));
  EXPECT_TRUE((Region{0, 5}.overlaps(Region{4, 4})));
}

TEST(DataAccess, EmptyRegionIsRejected) {
  EXPECT_THROW(validate(DataAccess::in(10, 0)), InvalidAccessError);
  EXPECT_NO_THROW(validate(DataAccess::in(10, 1)));
}

TEST(DataAccess, OfAddressesObjectBytes) {
  double value = 0;
  const auto a = DataAccess::of(value, AccessMode::InOut);
  EXPECT_EQ(a.region.base, reinterpret_cast<std::uintptr_t>(&value));
  EXPECT_EQ(a.region.length, sizeof(double));
  EXPECT_TRUE(a.writes());
}

TEST(DataAccess, ModePrinting) {
  std::ostringstream os;
  os << AccessMode::In << ' ' << AccessMode::Out << ' ' << AccessMode::InOut;
  EXPECT_EQ(os.str(), "in out inout");
}

TEST(DataAccessProperty, ConflictIsSymmetricAndMatchesBruteForce) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> base(0, 40);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<int> mode(0, 2);
  for (int i = 0; i < 5000; ++i) {
    DataAccess a{{static_cast<std::uint64_t>(base(rng)), static_cast<std::uint64_t>(len(rng))},
                 static_cast<AccessMode>(mode(rng))};
    DataAccess b{{static_cast<std::uint64_t>(base(rng)), static_cast<std::uint64_t>(len(rng))},
                 static_cast<AccessMode>(mode(rng))};
    bool shared_byte = false;
    for (auto x = a.region.base; x < a.region.end(); ++x) {
      shared_byte = shared_byte || (x >= b.region.base && x < b.region.end());
    }
    const bool expected = shared_byte && (a.writes() || b.writes());
    ASSERT_EQ(conflicts(a, b), expected);
    ASSERT_EQ(conflicts(b, a), expected);
  }
}
