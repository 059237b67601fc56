#pragma once

#include <memory>
#include <vector>

#include "sss/baseline_node.hpp"
#include "sss/coordinator.hpp"
#include "sss/node.hpp"
#include "sss/partition_map.hpp"
#include "sss/simnet.hpp"

namespace sss {

struct ClusterConfig {
  PlacementConfig placement;
  SimConfig sim;
  NodeOptions node;
  CoordinatorOptions coordinator;
};

/// One simulated machine: a server (SSS or baseline) plus the colocated
/// coordinator. Replies addressed to the coordinator are routed to it and
/// everything else goes to the server.
class Site : public Process {
 public:
  Site(NodeId id, const PartitionMap& pmap, Simulator& sim, const ClusterConfig& cfg);

  void on_message(const Message& msg) override;

  Coordinator& coordinator() { return *coord_; }
  const Coordinator& coordinator() const { return *coord_; }
  Node* sss_node() { return node_.get(); }
  const Node* sss_node() const { return node_.get(); }
  BaselineNode* baseline_node() { return baseline_.get(); }
  const BaselineNode* baseline_node() const { return baseline_.get(); }

  bool quiescent_clean() const;

 private:
  std::unique_ptr<Node> node_;
  std::unique_ptr<BaselineNode> baseline_;
  std::unique_ptr<Coordinator> coord_;
};

class Cluster {
 public:
  explicit Cluster(ClusterConfig cfg);
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  const ClusterConfig& config() const { return cfg_; }
  Simulator& sim() { return sim_; }
  const Simulator& sim() const { return sim_; }
  const PartitionMap& pmap() const { return pmap_; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(sites_.size()); }
  Site& site(NodeId n) { return *sites_.at(n); }
  const Site& site(NodeId n) const { return *sites_.at(n); }

  /// True when no locks, queues, parked work, or active transactions remain.
  bool quiescent_clean() const;
  /// Structural invariant violations across all SSS nodes.
  std::vector<std::string> check_invariants() const;

 private:
  ClusterConfig cfg_;
  PartitionMap pmap_;
  Simulator sim_;
  std::vector<std::unique_ptr<Site>> sites_;
};

}  // namespace sss
