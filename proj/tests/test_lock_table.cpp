#include <random>

#include <gtest/gtest.h>

#include "sss/lock_table.hpp"

namespace sss {
namespace {

const TxnId kA{0, 1}, kB{1, 1}, kC{2, 1};

TEST(LockTable, ExclusiveConflictsWithEverything) {
  LockTable t;
  ASSERT_TRUE(t.try_acquire(kA, {1}, {}));
  EXPECT_FALSE(t.try_acquire(kB, {1}, {}));
  EXPECT_FALSE(t.try_acquire(kB, {}, {1}));
  t.release(kA);
  EXPECT_TRUE(t.try_acquire(kB, {}, {1}));
}

TEST(LockTable, SharedLocksCoexistButBlockWriters) {
  LockTable t;
  ASSERT_TRUE(t.try_acquire(kA, {}, {1}));
  ASSERT_TRUE(t.try_acquire(kB, {}, {1}));
  EXPECT_FALSE(t.try_acquire(kC, {1}, {}));
  t.release(kA);
  EXPECT_FALSE(t.try_acquire(kC, {1}, {}));
  t.release(kB);
  EXPECT_TRUE(t.try_acquire(kC, {1}, {}));
}

TEST(LockTable, SoleSharedHolderMayUpgrade) {
  LockTable t;
  ASSERT_TRUE(t.try_acquire(kA, {}, {1}));
  ASSERT_TRUE(t.try_acquire(kA, {1}, {}));
  const auto* r = t.find(1);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->exclusive, kA);
  EXPECT_TRUE(r->shared.empty());
}

TEST(LockTable, AllOrNothing) {
  LockTable t;
  ASSERT_TRUE(t.try_acquire(kA, {2}, {}));
  EXPECT_FALSE(t.try_acquire(kB, {1, 2, 3}, {}));
  EXPECT_EQ(t.find(1), nullptr);
  EXPECT_EQ(t.find(3), nullptr);
  EXPECT_FALSE(t.holds_any(kB));
}

TEST(LockTable, KeyInBothListsIsExclusiveOnly) {
  LockTable t;
  ASSERT_TRUE(t.try_acquire(kA, {4}, {4}));
  EXPECT_TRUE(t.find(4)->shared.empty());
  t.release(kA);
  EXPECT_TRUE(t.empty());
}

TEST(LockTable, RandomScheduleStaysWellFormedAndDrains) {
  std::mt19937_64 rng(5);
  LockTable t;
  std::vector<TxnId> live;
  for (int step = 0; step < 5000; ++step) {
    if (!live.empty() && rng() % 3 == 0) {
      const std::size_t i = rng() % live.size();
      t.release(live[i]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      TxnId id{static_cast<NodeId>(rng() % 4), static_cast<std::uint64_t>(step + 1)};
      std::vector<Key> ex, sh;
      for (int k = 0; k < 3; ++k) (rng() % 2 ? ex : sh).push_back(rng() % 10);
      if (t.try_acquire(id, ex, sh)) live.push_back(id);
      else EXPECT_FALSE(t.holds_any(id));
    }
    ASSERT_TRUE(t.well_formed());
  }
  for (const auto& id : live) t.release(id);
  EXPECT_TRUE(t.empty());
}

}  // namespace
}  // namespace sss
