#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sss/core_types.hpp"
#include "sss/node.hpp"
#include "sss/partition_map.hpp"
#include "sss/simnet.hpp"

namespace sss {

enum class Protocol { kSss, kBaseline2pc };

const char* to_string(Protocol p);
std::optional<Protocol> parse_protocol(const std::string& s);

struct CoordinatorOptions {
  Protocol protocol = Protocol::kSss;
  /// Baseline only: read-only transactions validate through 2PC. Turning this
  /// off is a fault-injection mode used as a negative control for the checker.
  bool baseline_ro_validation = true;
  Time request_timeout = 50 * kUnit;
  Time vote_timeout = 50 * kUnit;
};

/// Sets every write-replica entry of the joined vote clock to the largest of
/// them, so all replicas install the transaction at the same position.
VectorClock finalize_commit_vc(VectorClock joined, const std::set<NodeId>& write_replicas);

/// Final record of one transaction attempt.
struct TxnOutcome {
  TxnId id;
  bool is_update = false;
  bool committed = false;
  Time begin = 0;
  Time end = 0;             // client reply (external commit) or abort
  Time internal_commit = 0; // last install among write replicas
  Time queue_wait = 0;      // longest snapshot-queue hold among write replicas
};

/// Receives the value, or nullopt when the read timed out and the update
/// transaction was aborted.
using ReadCont = std::function<void(std::optional<Value>)>;
using CommitCont = std::function<void(bool committed)>;

/// Client-facing transaction executor colocated with a node. Every call is
/// asynchronous: results arrive through continuations fired from simulator
/// events, never re-entrantly from the call itself.
class Coordinator {
 public:
  /// `node` is the colocated SSS server; null for the 2PC baseline.
  Coordinator(NodeId self, const PartitionMap& pmap, Simulator& sim, Node* node,
              CoordinatorOptions opts = {});

  NodeId id() const { return self_; }
  const CoordinatorOptions& options() const { return opts_; }

  TxnId begin(bool is_update);
  void read(const TxnId& txn, Key key, ReadCont cont);
  /// Throws std::logic_error on a read-only transaction.
  void write(const TxnId& txn, Key key, Value value);
  void commit(const TxnId& txn, CommitCont cont);
  /// Client-initiated abort before commit; update transactions only.
  void abort(const TxnId& txn);

  void on_message(const Message& msg);
  /// A read-only transaction finished; drops the holds it had on writers here.
  void on_remove(const TxnId& reader);
  /// The colocated node learned that `writer` is released.
  void on_release_notice(const TxnId& writer);

  const TxnDescriptor* find(const TxnId& txn) const;
  std::size_t active_count() const { return txns_.size(); }

  void set_outcome_listener(std::function<void(const TxnOutcome&)> fn) {
    listener_ = std::move(fn);
  }

 private:
  struct PendingRead {
    Key key = 0;
    std::uint32_t seq = 0;
    ReadCont cont;
    TimerId timeout = 0;
  };
  struct Record {
    TxnDescriptor desc;
    Time begin = 0;
    std::optional<PendingRead> read;
    std::uint32_t next_read_seq = 1;
    std::vector<TxnId> held;  // read-only: writers held back by this txn's reads
    // commit phase
    CommitCont on_commit;
    std::set<NodeId> participants;
    std::set<NodeId> write_replicas;
    std::set<NodeId> votes_pending;
    std::set<NodeId> acks_pending;
    std::set<TxnId> late_holders;  // readers that skipped an installed version
    bool releasing = false;
    bool votes_ok = true;
    VectorClock commit_vc;
    TimerId vote_timer = 0;
    Time internal_commit = 0;
    Time queue_wait = 0;
  };

  Record& get(const TxnId& txn);
  VectorClock local_clock() const;
  void send_read(Record& r);
  void on_read_return(const Message& msg);
  void on_vote(const Message& msg);
  void on_ack(const Message& msg);
  void on_hold_request(const Message& msg);
  /// Replies once no reader holds the update back and every writer it read
  /// from is released; SSS first announces the release to all nodes.
  void maybe_release(Record& r);
  void recheck_releases();
  void decide(Record& r);
  void finish(const TxnId& txn, bool committed);
  void trace(TraceKind kind, const TxnId& txn, std::optional<Key> key = std::nullopt,
             std::optional<TxnId> other = std::nullopt, std::int64_t num = 0,
             NodeId node_override = static_cast<NodeId>(-1));

  NodeId self_;
  const PartitionMap& pmap_;
  Simulator& sim_;
  Node* node_;
  CoordinatorOptions opts_;
  std::uint64_t next_seq_ = 1;
  std::map<TxnId, Record> txns_;
  std::function<void(const TxnOutcome&)> listener_;
};

}  // namespace sss
