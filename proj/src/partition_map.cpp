#include "sss/partition_map.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace sss {

PartitionMap::PartitionMap(PlacementConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.num_nodes == 0) throw ConfigError("cluster needs at least one node");
  if (cfg_.replication_degree == 0 || cfg_.replication_degree > cfg_.num_nodes) {
    throw ConfigError("replication_degree must be in [1, num_nodes]");
  }

  std::vector<Key> slot(cfg_.num_keys);
  std::iota(slot.begin(), slot.end(), Key{0});
  std::mt19937_64 rng(cfg_.placement_seed);
  std::shuffle(slot.begin(), slot.end(), rng);
  // slot[r] is the key ranked r; invert to key -> rank
  std::vector<std::uint32_t> rank(cfg_.num_keys);
  for (std::uint32_t r = 0; r < cfg_.num_keys; ++r) rank[slot[r]] = r;

  replicas_.resize(cfg_.num_keys);
  keys_on_.resize(cfg_.num_nodes);
  for (Key k = 0; k < cfg_.num_keys; ++k) {
    std::vector<NodeId> nodes;
    if (auto it = cfg_.explicit_placements.find(k); it != cfg_.explicit_placements.end()) {
      nodes = it->second;
      std::sort(nodes.begin(), nodes.end());
      nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
      if (nodes.empty()) throw ConfigError("empty explicit placement for key " + std::to_string(k));
      for (NodeId n : nodes) {
        if (n >= cfg_.num_nodes) {
          throw ConfigError("explicit placement names node " + std::to_string(n) + " out of range");
        }
      }
    } else {
      NodeId start = rank[k] % cfg_.num_nodes;
      for (std::uint32_t d = 0; d < cfg_.replication_degree; ++d) {
        nodes.push_back((start + d) % cfg_.num_nodes);
      }
      std::sort(nodes.begin(), nodes.end());
    }
    for (NodeId n : nodes) keys_on_[n].push_back(k);
    replicas_[k] = std::move(nodes);
  }
}

const std::vector<NodeId>& PartitionMap::replicas(Key key) const {
  if (key >= cfg_.num_keys) {
    throw KeyOutOfRange("key " + std::to_string(key) + " >= num_keys " +
                        std::to_string(cfg_.num_keys));
  }
  return replicas_[key];
}

bool PartitionMap::is_replica(Key key, NodeId node) const {
  const auto& r = replicas(key);
  return std::binary_search(r.begin(), r.end(), node);
}

}  // namespace sss
