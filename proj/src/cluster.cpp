#include "sss/cluster.hpp"

namespace sss {

Site::Site(NodeId id, const PartitionMap& pmap, Simulator& sim, const ClusterConfig& cfg) {
  if (cfg.coordinator.protocol == Protocol::kSss) {
    node_ = std::make_unique<Node>(id, pmap, sim, cfg.node);
  } else {
    baseline_ = std::make_unique<BaselineNode>(id, pmap, sim, cfg.node.lock_timeout);
  }
  coord_ = std::make_unique<Coordinator>(id, pmap, sim, node_.get(), cfg.coordinator);
}

void Site::on_message(const Message& msg) {
  switch (msg.kind()) {
    case MessageKind::kReadReturn:
    case MessageKind::kVote:
    case MessageKind::kAck:
    case MessageKind::kHoldRequest:
      coord_->on_message(msg);
      return;
    case MessageKind::kRemove:
      if (node_) node_->handle(msg);
      coord_->on_remove(msg.txn);
      return;
    case MessageKind::kRelease:
      node_->handle(msg);
      coord_->on_release_notice(msg.txn);
      return;
    default:
      if (node_) {
        node_->handle(msg);
      } else {
        baseline_->handle(msg);
      }
  }
}

bool Site::quiescent_clean() const {
  if (coord_->active_count() != 0) return false;
  return node_ ? node_->quiescent_clean() : baseline_->quiescent_clean();
}

Cluster::Cluster(ClusterConfig cfg)
    : cfg_(std::move(cfg)), pmap_(cfg_.placement), sim_(cfg_.sim, cfg_.placement.num_nodes) {
  for (NodeId n = 0; n < cfg_.placement.num_nodes; ++n) {
    sites_.push_back(std::make_unique<Site>(n, pmap_, sim_, cfg_));
    sim_.attach(n, sites_.back().get());
  }
}

bool Cluster::quiescent_clean() const {
  for (const auto& s : sites_) {
    if (!s->quiescent_clean()) return false;
  }
  return true;
}

std::vector<std::string> Cluster::check_invariants() const {
  std::vector<std::string> out;
  for (const auto& s : sites_) {
    if (const Node* n = s->sss_node()) {
      for (auto& v : n->check_invariants()) out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace sss
