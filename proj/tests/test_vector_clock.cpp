#include <random>

#include <gtest/gtest.h>

#include "sss/core_types.hpp"

namespace sss {
namespace {

VectorClock random_vc(std::mt19937_64& rng, std::size_t n, std::uint64_t hi) {
  std::uniform_int_distribution<std::uint64_t> d(0, hi);
  std::vector<std::uint64_t> e(n);
  for (auto& x : e) x = d(rng);
  return VectorClock(e);
}

TEST(VectorClock, JoinExamples) {
  EXPECT_EQ(vc_join(VectorClock{0, 0}, VectorClock{0, 0}), (VectorClock{0, 0}));
  // coordinator folding N2's vote into N1's clock
  EXPECT_EQ(vc_join(VectorClock{5, 4}, VectorClock{3, 8}), (VectorClock{5, 8}));
}

TEST(VectorClock, LeqExamples) {
  EXPECT_TRUE(vc_leq(VectorClock{3, 7}, VectorClock{3, 8}));
  VectorClock v{2, 9, 4};
  EXPECT_TRUE(vc_leq(v, v));
  EXPECT_FALSE(vc_leq(VectorClock{5, 4}, VectorClock{3, 8}));
  EXPECT_FALSE(vc_leq(VectorClock{3, 8}, VectorClock{5, 4}));
}

TEST(VectorClock, LengthMismatchIsConfigError) {
  EXPECT_THROW(vc_join(VectorClock{1, 2}, VectorClock{1, 2, 3}), ConfigError);
  EXPECT_THROW(vc_leq(VectorClock{1}, VectorClock{1, 2}), ConfigError);
}

TEST(VectorClock, JoinMatchesPerEntryLoop) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng() % 8;
    VectorClock a = random_vc(rng, n, 20), b = random_vc(rng, n, 20);
    VectorClock j = vc_join(a, b);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_EQ(j[k], a[k] > b[k] ? a[k] : b[k]);
    }
    EXPECT_TRUE(vc_leq(a, j));
    EXPECT_TRUE(vc_leq(b, j));
  }
}

TEST(VectorClock, JoinIsCommutativeAssociativeIdempotent) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng() % 6;
    VectorClock a = random_vc(rng, n, 9), b = random_vc(rng, n, 9), c = random_vc(rng, n, 9);
    EXPECT_EQ(vc_join(a, b), vc_join(b, a));
    EXPECT_EQ(vc_join(vc_join(a, b), c), vc_join(a, vc_join(b, c)));
    EXPECT_EQ(vc_join(a, a), a);
  }
}

TEST(VectorClock, LeqIsPartialOrder) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 2000; ++i) {
    // small ranges make comparable pairs common
    const std::size_t n = 1 + rng() % 3;
    VectorClock a = random_vc(rng, n, 2), b = random_vc(rng, n, 2), c = random_vc(rng, n, 2);
    EXPECT_TRUE(vc_leq(a, a));
    if (vc_leq(a, b) && vc_leq(b, a)) EXPECT_EQ(a, b);
    if (vc_leq(a, b) && vc_leq(b, c)) EXPECT_TRUE(vc_leq(a, c));
  }
}

TEST(SnapshotQueueOrder, SnapshotThenReadBeforeWriteThenId) {
  SnapshotQueueEntry r7{{1, 5}, 7, EntryKind::kRead};
  SnapshotQueueEntry w7{{0, 1}, 7, EntryKind::kWrite};
  SnapshotQueueEntry w8{{0, 2}, 8, EntryKind::kWrite};
  SnapshotQueueEntry r7b{{2, 1}, 7, EntryKind::kRead};
  EXPECT_TRUE(queue_order_less(r7, w8));
  EXPECT_TRUE(queue_order_less(r7, w7));
  EXPECT_FALSE(queue_order_less(w7, r7));
  EXPECT_TRUE(queue_order_less(r7, r7b));
}

TEST(TxnDescriptor, LastBufferedWriteWins) {
  TxnDescriptor d;
  d.is_update = true;
  d.buffer_write(3, "a");
  d.buffer_write(3, "b");
  ASSERT_EQ(d.write_set.size(), 1u);
  ASSERT_NE(d.buffered_write(3), nullptr);
  EXPECT_EQ(*d.buffered_write(3), "b");
  EXPECT_EQ(d.buffered_write(4), nullptr);
}

TEST(TxnDescriptor, RejectsIllegalTransitions) {
  TxnDescriptor ro;
  EXPECT_THROW(ro.advance(TxnStatus::kAborted), std::logic_error);
  ro.advance(TxnStatus::kExternallyCommitted);

  TxnDescriptor d;
  d.is_update = true;
  d.advance(TxnStatus::kPreparing);
  d.advance(TxnStatus::kInternallyCommitted);
  EXPECT_THROW(d.advance(TxnStatus::kActive), std::logic_error);
  EXPECT_THROW(d.advance(TxnStatus::kAborted), std::logic_error);
}

}  // namespace
}  // namespace sss
