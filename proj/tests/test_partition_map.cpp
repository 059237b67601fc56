#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "sss/partition_map.hpp"

namespace sss {
namespace {

PlacementConfig cfg(std::uint32_t nodes, std::uint32_t keys, std::uint32_t degree,
                    std::uint64_t seed = 1) {
  PlacementConfig c;
  c.num_nodes = nodes;
  c.num_keys = keys;
  c.replication_degree = degree;
  c.placement_seed = seed;
  return c;
}

TEST(PartitionMap, ExplicitPlacementPutsYOnSecondNode) {
  PlacementConfig c = cfg(2, 2, 1);
  c.explicit_placements[1] = {1};
  PartitionMap pm(c);
  EXPECT_EQ(pm.replicas(1), (std::vector<NodeId>{1}));
  EXPECT_TRUE(pm.is_replica(1, 1));
  EXPECT_FALSE(pm.is_replica(1, 0));
}

TEST(PartitionMap, FullReplicationStoresEveryKeyEverywhere) {
  PartitionMap pm(cfg(5, 50, 5));
  for (Key k = 0; k < 50; ++k) EXPECT_EQ(pm.replicas(k), (std::vector<NodeId>{0, 1, 2, 3, 4}));
}

TEST(PartitionMap, DegreeTwoOnTwentyNodesGivesFiveHundredKeysEach) {
  PartitionMap pm(cfg(20, 5000, 2));
  for (NodeId n = 0; n < 20; ++n) {
    const double count = static_cast<double>(pm.keys_on(n).size());
    EXPECT_GE(count, 475.0);
    EXPECT_LE(count, 525.0);
  }
}

TEST(PartitionMap, EveryKeyHasDistinctReplicasOfTheConfiguredDegree) {
  for (std::uint32_t degree = 1; degree <= 4; ++degree) {
    PartitionMap pm(cfg(7, 300, degree, degree));
    for (Key k = 0; k < 300; ++k) {
      const auto& r = pm.replicas(k);
      EXPECT_EQ(r.size(), degree);
      EXPECT_EQ(std::set<NodeId>(r.begin(), r.end()).size(), degree);
      EXPECT_TRUE(std::is_sorted(r.begin(), r.end()));
    }
  }
}

TEST(PartitionMap, LoadWithinTenPercentOfMean) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::uint32_t nodes = 4 + seed % 9;
    const std::uint32_t keys = 1000 + static_cast<std::uint32_t>(seed) * 37;
    PartitionMap pm(cfg(nodes, keys, 2, seed));
    const double mean = 2.0 * keys / nodes;
    for (NodeId n = 0; n < nodes; ++n) {
      EXPECT_LE(static_cast<double>(pm.keys_on(n).size()), 1.1 * mean) << "seed " << seed;
    }
  }
}

TEST(PartitionMap, PureFunctionOfConfig) {
  PartitionMap a(cfg(6, 400, 2, 9)), b(cfg(6, 400, 2, 9)), c(cfg(6, 400, 2, 10));
  bool differs = false;
  for (Key k = 0; k < 400; ++k) {
    EXPECT_EQ(a.replicas(k), b.replicas(k));
    differs |= a.replicas(k) != c.replicas(k);
  }
  EXPECT_TRUE(differs);
}

TEST(PartitionMap, KeysOnAgreesWithReplicas) {
  PartitionMap pm(cfg(5, 200, 2));
  for (NodeId n = 0; n < 5; ++n) {
    for (Key k : pm.keys_on(n)) EXPECT_TRUE(pm.is_replica(k, n));
  }
}

TEST(PartitionMap, Errors) {
  PartitionMap pm(cfg(4, 10, 2));
  EXPECT_THROW(pm.replicas(10), KeyOutOfRange);
  EXPECT_THROW(PartitionMap(cfg(2, 10, 3)), ConfigError);
  EXPECT_THROW(PartitionMap(cfg(2, 10, 0)), ConfigError);
  PlacementConfig bad = cfg(2, 10, 1);
  bad.explicit_placements[0] = {5};
  EXPECT_THROW(PartitionMap{bad}, ConfigError);
}

}  // namespace
}  // namespace sss
