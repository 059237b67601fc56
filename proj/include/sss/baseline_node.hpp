#pragma once

#include <map>
#include <unordered_map>
#include <vector>

#include "sss/core_types.hpp"
#include "sss/lock_table.hpp"
#include "sss/partition_map.hpp"
#include "sss/simnet.hpp"

namespace sss {

/// Server side of the 2PC baseline: one version per key stamped with a
/// scalar counter, lock-based validation, no commit queue, no NLog, no
/// snapshot-queues. Every transaction, read-only included, goes through
/// prepare/validate/decide.
class BaselineNode {
 public:
  BaselineNode(NodeId id, const PartitionMap& pmap, Simulator& sim, Time lock_timeout = 5 * kUnit);

  NodeId id() const { return id_; }
  void handle(const Message& msg);

  const Version* current(Key k) const;
  const LockTable& locks() const { return locks_; }
  bool quiescent_clean() const {
    return locks_.empty() && prepared_.empty() && parked_.empty();
  }
  /// Counter-based validation over the locally stored subset of `rs`.
  bool validate(const std::vector<ReadItem>& rs) const;

 private:
  struct Prepared {
    NodeId coordinator = 0;
    std::vector<WriteItem> local_writes;
  };
  struct Parked {
    Message msg;
    TimerId timeout = 0;
  };

  void on_read(const Message& msg);
  void on_prepare(const Message& msg);
  bool try_prepare(const Message& msg);
  void on_decide(const Message& msg);
  void retry_parked();
  void send(NodeId to, const TxnId& txn, Payload p) { sim_.send(Message{id_, to, txn, std::move(p)}); }

  NodeId id_;
  const PartitionMap& pmap_;
  Simulator& sim_;
  Time lock_timeout_;
  std::unordered_map<Key, Version> store_;
  LockTable locks_;
  std::map<TxnId, Prepared> prepared_;
  std::vector<Parked> parked_;
  std::map<TxnId, bool> decided_abort_;
};

}  // namespace sss
