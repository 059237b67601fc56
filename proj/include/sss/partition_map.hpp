#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "sss/core_types.hpp"

namespace sss {

struct PlacementConfig {
  std::uint32_t num_nodes = 4;
  std::uint32_t num_keys = 100;
  std::uint32_t replication_degree = 2;
  std::uint64_t placement_seed = 1;
  /// Explicit per-key placements; override the ring placement.
  std::map<Key, std::vector<NodeId>> explicit_placements;
};

class KeyOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Static key -> replica-set lookup. Keys are scattered by a seeded
/// permutation and each key lives on `replication_degree` consecutive ring
/// nodes starting at its slot, so per-node load is balanced to within one key.
class PartitionMap {
 public:
  explicit PartitionMap(PlacementConfig cfg);

  const PlacementConfig& config() const { return cfg_; }
  std::uint32_t num_nodes() const { return cfg_.num_nodes; }
  std::uint32_t num_keys() const { return cfg_.num_keys; }

  /// Sorted, distinct replica indices. Throws KeyOutOfRange.
  const std::vector<NodeId>& replicas(Key key) const;
  bool is_replica(Key key, NodeId node) const;

  /// Keys with a replica on `node`, ascending.
  const std::vector<Key>& keys_on(NodeId node) const { return keys_on_.at(node); }

 private:
  PlacementConfig cfg_;
  std::vector<std::vector<NodeId>> replicas_;
  std::vector<std::vector<Key>> keys_on_;
};

}  // namespace sss
