#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sss/core_types.hpp"
#include "sss/lock_table.hpp"
#include "sss/partition_map.hpp"
#include "sss/simnet.hpp"

namespace sss {

struct NodeOptions {
  Time lock_timeout = 5 * kUnit;
  Time starvation_threshold = 100 * kUnit;
  Time backoff_initial = 1 * kUnit;
  Time backoff_cap = 64 * kUnit;
  /// Starvation back-off rounds before a read is served anyway; bounding them
  /// keeps two starving writers' readers from delaying each other forever.
  std::uint32_t backoff_max_attempts = 7;
  /// Keep at most this many versions per key; unlimited when unset.
  std::optional<std::size_t> version_history;
};

struct NLogEntry {
  TxnId txn;
  VectorClock vc;
  std::vector<Key> keys;
};

enum class CommitStatus : std::uint8_t { kPending, kReady };

struct CommitQueueEntry {
  TxnId txn;
  VectorClock vc;
  CommitStatus status = CommitStatus::kPending;
  std::vector<Key> write_keys;
  std::vector<Key> read_keys;
};

struct QueuedEntry {
  SnapshotQueueEntry entry;
  Time since = 0;
};

/// Per-key snapshot-queue, split into read-only and update sub-queues, each
/// kept sorted by queue_order_less.
struct SnapshotQueue {
  std::vector<QueuedEntry> ro_entries;
  std::vector<QueuedEntry> up_entries;

  bool empty() const { return ro_entries.empty() && up_entries.empty(); }
  /// Inserts unless the txn already has an entry in that sub-queue.
  bool insert(const SnapshotQueueEntry& e, Time now);
  std::size_t erase(const TxnId& txn, EntryKind kind);
  bool sorted() const;
};

/// What a read-only version selection saw and chose; lets tests re-derive
/// the choice independently.
struct ReadObservation {
  NodeId node = 0;
  TxnId txn;
  Key key = 0;
  std::vector<Version> chain;           // oldest first
  std::set<TxnId> released;             // writers of `chain` readable here
  std::set<TxnId> held;                 // writers the reader holds back
  std::uint64_t insertion_snapshot = 0;
  TxnId selected_writer;
};

/// Server side of one SSS node: multi-version store, snapshot-queues, lock
/// table, NodeVC, NLog and CommitQ, plus every server-side message handler.
/// Handlers run to completion; "wait until" conditions park the request and
/// are re-checked when the relevant state changes.
class Node {
 public:
  Node(NodeId id, const PartitionMap& pmap, Simulator& sim, NodeOptions opts = {});

  NodeId id() const { return id_; }

  /// Directed-scenario setup: overwrite the starting NodeVC/NLog clock.
  void seed_clock(const VectorClock& vc);
  /// Directed-scenario setup: append a committed version written outside any run.
  void seed_version(Key key, Value value, const VectorClock& vc, TxnId writer = kInitialWriter);

  void handle(const Message& msg);

  // -- exposed operations ----------------------------------------------------
  /// Prepare-time validation over the locally stored subset of `rs`: fails when a
  /// key's newest version is not the version that was read, or its entry for
  /// this node exceeds `t_vc`.
  bool validate(const std::vector<ReadItem>& rs, const VectorClock& t_vc) const;

  // -- coordinator support ---------------------------------------------------
  const VectorClock& most_recent_vc() const { return nlog_.back().vc; }
  /// True once the writer's coordinator started releasing it; initial versions
  /// are always released.
  bool is_released(const TxnId& writer) const {
    return writer.is_initial() || released_.count(writer) != 0;
  }
  bool is_removed(const TxnId& ro) const { return removed_.count(ro) != 0; }
  /// Records that entries of `ro` were handed to `dest`, so a later Remove is
  /// forwarded there.
  void note_propagation(const TxnId& ro, NodeId dest);

  // -- introspection ---------------------------------------------------------
  const VectorClock& node_vc() const { return node_vc_; }
  const std::vector<NLogEntry>& nlog() const { return nlog_; }
  const std::vector<CommitQueueEntry>& commit_queue() const { return commit_q_; }
  const LockTable& locks() const { return locks_; }
  const std::vector<Version>* chain(Key k) const;
  const SnapshotQueue* squeue(Key k) const;
  std::size_t parked_reads() const { return parked_reads_.size(); }
  std::size_t parked_prepares() const { return parked_prepares_.size(); }
  std::size_t precommit_count() const { return precommit_.size(); }

  /// All queues, locks, commit queue and wait lists empty.
  bool quiescent_clean() const;
  /// Human-readable invariant violations; empty when healthy.
  std::vector<std::string> check_invariants() const;

  void set_read_observer(std::function<void(const ReadObservation&)> fn) {
    read_observer_ = std::move(fn);
  }

 private:
  struct Prepared {
    NodeId coordinator = 0;
    VectorClock t_vc;
    std::vector<WriteItem> local_writes;
    std::vector<Key> local_reads;
    std::vector<SnapshotQueueEntry> propagated;
  };
  struct ParkedPrepare {
    Message msg;
    TimerId timeout = 0;
  };
  struct PreCommit {
    NodeId coordinator = 0;
    VectorClock vc;
    std::vector<Key> keys;
    Time installed_at = 0;
  };
  /// A read-only read waiting for a writer's coordinator to answer a hold.
  struct ParkedRead {
    Message msg;
    std::vector<TxnId> held;  // holds taken so far by this read
    TxnId awaiting;
    std::uint32_t attempt = 0;
  };

  void on_read_request(const Message& msg);
  void on_prepare(const Message& msg);
  void on_decide(const Message& msg);
  void on_remove(const Message& msg);
  void on_release(const Message& msg);
  void on_hold_reply(const Message& msg);

  bool try_prepare(const Message& msg);
  void retry_parked_prepares();
  void try_commit_head();
  void start_precommit(const TxnId& txn, PreCommit pc, const std::vector<SnapshotQueueEntry>& propagated);
  void end_precommit(const TxnId& txn);
  void recheck_precommits();
  void sort_commit_queue();

  void serve_read_only(const Message& msg, std::uint32_t attempt, std::vector<TxnId> held);
  /// Re-serves reads parked on `writer`: only `holder`'s when its hold was
  /// granted, every one when the writer turned out to be released.
  void resume_parked(const TxnId& writer, std::optional<TxnId> holder);
  void serve_update_read(const Message& msg);

  void send(NodeId to, const TxnId& txn, Payload p);
  void trace(TraceKind kind, const TxnId& txn, std::optional<Key> key = std::nullopt,
             std::optional<TxnId> other = std::nullopt, std::int64_t num = 0,
             std::string detail = {}, VectorClock vc = {});

  NodeId id_;
  const PartitionMap& pmap_;
  Simulator& sim_;
  NodeOptions opts_;

  VectorClock node_vc_;
  std::vector<NLogEntry> nlog_;
  std::unordered_map<Key, std::vector<Version>> store_;
  std::map<Key, SnapshotQueue> squeues_;
  LockTable locks_;
  std::vector<CommitQueueEntry> commit_q_;

  std::map<TxnId, Prepared> prepared_;
  std::vector<ParkedPrepare> parked_prepares_;
  std::map<TxnId, PreCommit> precommit_;
  std::vector<ParkedRead> parked_reads_;
  std::set<TxnId> decided_abort_;

  std::unordered_set<TxnId, TxnIdHash> removed_;
  std::unordered_set<TxnId, TxnIdHash> released_;
  std::map<TxnId, std::set<NodeId>> propagated_to_;
  std::map<TxnId, std::set<NodeId>> forwarded_;
  std::map<TxnId, std::set<Key>> ro_keys_;  // keys holding R entries per read-only txn

  std::function<void(const ReadObservation&)> read_observer_;
};

}  // namespace sss
