#include "sss/node.hpp"

#include <algorithm>
#include <stdexcept>

namespace sss {

// ---------------------------------------------------------------------------
// SnapshotQueue

bool SnapshotQueue::insert(const SnapshotQueueEntry& e, Time now) {
  auto& list = e.kind == EntryKind::kRead ? ro_entries : up_entries;
  for (const auto& q : list) {
    if (q.entry.txn == e.txn) return false;
  }
  auto pos = std::upper_bound(list.begin(), list.end(), e,
                              [](const SnapshotQueueEntry& a, const QueuedEntry& b) {
                                return queue_order_less(a, b.entry);
                              });
  list.insert(pos, QueuedEntry{e, now});
  return true;
}

std::size_t SnapshotQueue::erase(const TxnId& txn, EntryKind kind) {
  auto& list = kind == EntryKind::kRead ? ro_entries : up_entries;
  return std::erase_if(list, [&](const QueuedEntry& q) { return q.entry.txn == txn; });
}

bool SnapshotQueue::sorted() const {
  auto cmp = [](const QueuedEntry& a, const QueuedEntry& b) {
    return queue_order_less(a.entry, b.entry);
  };
  return std::is_sorted(ro_entries.begin(), ro_entries.end(), cmp) &&
         std::is_sorted(up_entries.begin(), up_entries.end(), cmp);
}

// ---------------------------------------------------------------------------
// Node

Node::Node(NodeId id, const PartitionMap& pmap, Simulator& sim, NodeOptions opts)
    : id_(id), pmap_(pmap), sim_(sim), opts_(opts), node_vc_(pmap.num_nodes()) {
  nlog_.push_back({kInitialWriter, VectorClock(pmap.num_nodes()), {}});
  for (Key k : pmap.keys_on(id)) {
    store_[k].push_back(Version{Value{}, VectorClock(pmap.num_nodes()), kInitialWriter, 0});
  }
}

void Node::seed_clock(const VectorClock& vc) {
  if (vc.size() != pmap_.num_nodes()) throw ConfigError("seed clock has wrong size");
  node_vc_ = vc;
  nlog_.assign(1, NLogEntry{kInitialWriter, vc, {}});
}

void Node::seed_version(Key key, Value value, const VectorClock& vc, TxnId writer) {
  auto it = store_.find(key);
  if (it == store_.end()) throw ConfigError("seed_version for a key not stored on this node");
  std::uint64_t counter = it->second.back().counter + 1;
  it->second.push_back(Version{std::move(value), vc, writer, counter});
  nlog_.push_back({writer, vc, {key}});
  node_vc_.join_with(vc);
}

void Node::handle(const Message& msg) {
  switch (msg.kind()) {
    case MessageKind::kReadRequest: on_read_request(msg); break;
    case MessageKind::kPrepare: on_prepare(msg); break;
    case MessageKind::kDecide: on_decide(msg); break;
    case MessageKind::kRemove: on_remove(msg); break;
    case MessageKind::kRelease: on_release(msg); break;
    case MessageKind::kHoldReply: on_hold_reply(msg); break;
    default:
      throw std::logic_error(std::string("node cannot handle ") + to_string(msg.kind()));
  }
}

void Node::send(NodeId to, const TxnId& txn, Payload p) {
  sim_.send(Message{id_, to, txn, std::move(p)});
}

void Node::trace(TraceKind kind, const TxnId& txn, std::optional<Key> key,
                 std::optional<TxnId> other, std::int64_t num, std::string detail,
                 VectorClock vc) {
  sim_.record(TraceRecord{.kind = kind, .node = id_, .txn = txn, .key = key, .other = other,
                          .vc = std::move(vc), .num = num, .detail = std::move(detail)});
}

const std::vector<Version>* Node::chain(Key k) const {
  auto it = store_.find(k);
  return it == store_.end() ? nullptr : &it->second;
}

const SnapshotQueue* Node::squeue(Key k) const {
  auto it = squeues_.find(k);
  return it == squeues_.end() ? nullptr : &it->second;
}

void Node::note_propagation(const TxnId& ro, NodeId dest) {
  if (!is_removed(ro)) propagated_to_[ro].insert(dest);
}

// ---------------------------------------------------------------------------
// Reads

void Node::on_read_request(const Message& msg) {
  const auto& rq = std::get<ReadRequest>(msg.payload);
  if (!pmap_.is_replica(rq.key, id_)) {
    throw std::logic_error("read request for key " + std::to_string(rq.key) +
                           " not stored on node " + std::to_string(id_));
  }
  if (rq.is_update) {
    serve_update_read(msg);
  } else {
    serve_read_only(msg, 0, {});
  }
}

void Node::serve_update_read(const Message& msg) {
  const auto& rq = std::get<ReadRequest>(msg.payload);
  const Version& head = store_.at(rq.key).back();
  ReadReturn out;
  out.key = rq.key;
  out.read_seq = rq.read_seq;
  out.value = head.value;
  out.writer = head.writer;
  out.version_vc = head.vc;
  out.counter = head.counter;
  out.max_vc = most_recent_vc();
  if (auto it = squeues_.find(rq.key); it != squeues_.end()) {
    for (const auto& q : it->second.ro_entries) {
      out.propagated.push_back(q.entry);
      propagated_to_[q.entry.txn].insert(msg.from);
    }
  }
  send(msg.from, msg.txn, std::move(out));
}

void Node::serve_read_only(const Message& msg, std::uint32_t attempt, std::vector<TxnId> held) {
  const auto& rq = std::get<ReadRequest>(msg.payload);
  const TxnId& txn = msg.txn;
  if (is_removed(txn)) return;  // late request of a finished transaction

  const auto& versions = store_.at(rq.key);
  auto qit = squeues_.find(rq.key);

  // Starvation guard: while a writer of this key has been queued for too
  // long, new readers back off instead of adding to its holders.
  if (qit != squeues_.end() && attempt < opts_.backoff_max_attempts) {
    for (const auto& w : qit->second.up_entries) {
      if (sim_.now() - w.since <= opts_.starvation_threshold) continue;
      Time delay = opts_.backoff_initial;
      for (std::uint32_t a = 0; a < attempt && delay < opts_.backoff_cap; ++a) delay *= 2;
      delay = std::min(delay, opts_.backoff_cap);
      trace(TraceKind::kReadBackoff, txn, rq.key, w.entry.txn, delay);
      sim_.schedule(id_, delay, [this, msg, attempt, held = std::move(held)] {
        serve_read_only(msg, attempt + 1, held);
      });
      return;
    }
  }

  // The R entry goes in before any version is skipped, so that a local hold
  // pins the writer even while this read waits on a hold elsewhere.
  // Insertion snapshot: at first contact, the join of every NLog clock the
  // reader may observe; afterwards the reader's own entry.
  const std::size_t n = pmap_.num_nodes();
  VectorClock max_vc(n);
  if (!rq.has_read.at(id_)) {
    for (const auto& e : nlog_) {
      bool visible = true;
      for (std::size_t w = 0; w < n && visible; ++w) {
        if (rq.has_read[w] && e.vc[w] > rq.vc[w]) visible = false;
      }
      if (visible) max_vc.join_with(e.vc);
    }
  } else {
    max_vc = rq.vc;
  }
  SnapshotQueueEntry entry{txn, max_vc[id_], EntryKind::kRead};
  if (squeues_[rq.key].insert(entry, sim_.now())) {
    ro_keys_[txn].insert(rq.key);
    trace(TraceKind::kEnqueue, txn, rq.key, std::nullopt,
          static_cast<std::int64_t>(entry.insertion_snapshot), "R");
  }
  qit = squeues_.find(rq.key);

  // Newest released version. An unreleased one is skipped, and the reader
  // then holds its writer back until the reader's Remove: through this key's
  // queue while the writer's W entry is still here, otherwise by asking the
  // writer's coordinator, which refuses once it has started releasing.
  auto holds = [&](const TxnId& w) {
    return std::find(held.begin(), held.end(), w) != held.end() ||
           std::find(rq.held.begin(), rq.held.end(), w) != rq.held.end();
  };
  const Version* chosen = nullptr;
  for (auto it = versions.rbegin(); it != versions.rend(); ++it) {
    if (is_released(it->writer)) {
      chosen = &*it;
      break;
    }
    if (holds(it->writer)) continue;
    const bool queued_here =
        qit != squeues_.end() &&
        std::any_of(qit->second.up_entries.begin(), qit->second.up_entries.end(),
                    [&](const QueuedEntry& q) { return q.entry.txn == it->writer; });
    if (!queued_here) {
      propagated_to_[txn].insert(it->writer.origin);  // Remove must reach that coordinator
      send(it->writer.origin, it->writer, HoldRequest{txn});
      trace(TraceKind::kReadDeferred, txn, rq.key, it->writer);
      parked_reads_.push_back(ParkedRead{msg, std::move(held), it->writer, attempt});
      return;
    }
    trace(TraceKind::kHold, txn, rq.key, it->writer, 0, "local");
    held.push_back(it->writer);
  }
  if (chosen == nullptr) throw std::logic_error("no released version of key " + std::to_string(rq.key));

  if (read_observer_) {
    ReadObservation obs;
    obs.node = id_;
    obs.txn = txn;
    obs.key = rq.key;
    obs.chain = versions;
    for (const auto& v : versions) {
      if (is_released(v.writer)) obs.released.insert(v.writer);
    }
    obs.held.insert(rq.held.begin(), rq.held.end());
    obs.held.insert(held.begin(), held.end());
    obs.insertion_snapshot = entry.insertion_snapshot;
    obs.selected_writer = chosen->writer;
    read_observer_(obs);
  }

  ReadReturn out;
  out.key = rq.key;
  out.read_seq = rq.read_seq;
  out.value = chosen->value;
  out.writer = chosen->writer;
  out.version_vc = chosen->vc;
  out.counter = chosen->counter;
  out.max_vc = vc_join(max_vc, chosen->vc);
  out.held = std::move(held);
  send(msg.from, txn, std::move(out));
}

void Node::on_hold_reply(const Message& msg) {
  const auto& h = std::get<HoldReply>(msg.payload);
  trace(TraceKind::kHold, h.reader, std::nullopt, msg.txn, 0, h.granted ? "granted" : "refused");
  if (!h.granted) released_.insert(msg.txn);  // its coordinator is releasing it
  resume_parked(msg.txn, h.granted ? std::optional<TxnId>(h.reader) : std::nullopt);
}

void Node::resume_parked(const TxnId& writer, std::optional<TxnId> holder) {
  std::vector<ParkedRead> ready;
  std::erase_if(parked_reads_, [&](ParkedRead& p) {
    if (p.awaiting != writer || (holder && p.msg.txn != *holder)) return false;
    ready.push_back(std::move(p));
    return true;
  });
  for (auto& p : ready) {
    if (holder) p.held.push_back(writer);
    serve_read_only(p.msg, p.attempt, std::move(p.held));
  }
}

void Node::on_release(const Message& msg) {
  released_.insert(msg.txn);
  trace(TraceKind::kRelease, msg.txn);
  // a pending hold request on this writer will be refused; no need to wait
  resume_parked(msg.txn, std::nullopt);
}

// ---------------------------------------------------------------------------
// Commit path

bool Node::validate(const std::vector<ReadItem>& rs, const VectorClock& t_vc) const {
  for (const auto& r : rs) {
    auto it = store_.find(r.key);
    if (it == store_.end()) continue;
    const Version& head = it->second.back();
    if (head.vc[id_] > t_vc[id_]) return false;
    if (head.writer != r.writer) return false;
  }
  return true;
}

void Node::on_prepare(const Message& msg) {
  const auto& p = std::get<Prepare>(msg.payload);
  if (decided_abort_.count(msg.txn)) {
    send(msg.from, msg.txn, Vote{p.vc, false});
    return;
  }
  if (prepared_.count(msg.txn)) return;
  if (try_prepare(msg)) return;

  TxnId txn = msg.txn;
  TimerId timer = sim_.schedule(id_, opts_.lock_timeout, [this, txn] {
    auto it = std::find_if(parked_prepares_.begin(), parked_prepares_.end(),
                           [&](const ParkedPrepare& pp) { return pp.msg.txn == txn; });
    if (it == parked_prepares_.end()) return;
    Message m = std::move(it->msg);
    parked_prepares_.erase(it);
    trace(TraceKind::kLockTimeout, txn);
    trace(TraceKind::kVote, txn, std::nullopt, std::nullopt, 0);
    send(m.from, txn, Vote{std::get<Prepare>(m.payload).vc, false});
  });
  parked_prepares_.push_back(ParkedPrepare{msg, timer});
}

bool Node::try_prepare(const Message& msg) {
  const auto& p = std::get<Prepare>(msg.payload);
  Prepared st;
  st.coordinator = msg.from;
  st.t_vc = p.vc;
  st.propagated = p.propagated;
  std::vector<Key> wkeys;
  for (const auto& w : p.write_set) {
    if (pmap_.is_replica(w.key, id_)) {
      st.local_writes.push_back(w);
      wkeys.push_back(w.key);
    }
  }
  for (const auto& r : p.read_set) {
    if (pmap_.is_replica(r.key, id_) &&
        std::find(wkeys.begin(), wkeys.end(), r.key) == wkeys.end()) {
      st.local_reads.push_back(r.key);
    }
  }
  if (!locks_.try_acquire(msg.txn, wkeys, st.local_reads)) return false;
  if (!wkeys.empty() || !st.local_reads.empty()) trace(TraceKind::kLock, msg.txn);

  if (!validate(p.read_set, p.vc)) {
    locks_.release(msg.txn);
    trace(TraceKind::kVote, msg.txn, std::nullopt, std::nullopt, 0, "validation");
    send(msg.from, msg.txn, Vote{p.vc, false});
    retry_parked_prepares();
    return true;
  }

  VectorClock prep;
  if (!st.local_writes.empty()) {
    node_vc_[id_] += 1;
    prep = node_vc_;
    commit_q_.push_back(
        CommitQueueEntry{msg.txn, prep, CommitStatus::kPending, wkeys, st.local_reads});
    sort_commit_queue();
  } else {
    prep = most_recent_vc();
  }
  prepared_.emplace(msg.txn, std::move(st));
  trace(TraceKind::kVote, msg.txn, std::nullopt, std::nullopt, 1, {}, prep);
  send(msg.from, msg.txn, Vote{prep, true});
  return true;
}

void Node::retry_parked_prepares() {
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (std::size_t i = 0; i < parked_prepares_.size(); ++i) {
      // take it out first: try_prepare may re-enter this function
      ParkedPrepare pp = parked_prepares_[i];
      parked_prepares_.erase(parked_prepares_.begin() + static_cast<std::ptrdiff_t>(i));
      if (try_prepare(pp.msg)) {
        sim_.cancel(pp.timeout);
        progressed = true;
        break;
      }
      parked_prepares_.insert(parked_prepares_.begin() + static_cast<std::ptrdiff_t>(i),
                              std::move(pp));
    }
  }
}

void Node::sort_commit_queue() {
  std::stable_sort(commit_q_.begin(), commit_q_.end(),
                   [this](const CommitQueueEntry& a, const CommitQueueEntry& b) {
                     if (a.vc[id_] != b.vc[id_]) return a.vc[id_] < b.vc[id_];
                     // a pending entry may still settle on this same value, so it
                     // goes first and tied ready entries install together with it
                     if (a.status != b.status) return a.status == CommitStatus::kPending;
                     return a.txn < b.txn;
                   });
}

void Node::on_decide(const Message& msg) {
  const auto& d = std::get<Decide>(msg.payload);
  const TxnId& txn = msg.txn;
  trace(TraceKind::kDecide, txn, std::nullopt, std::nullopt, d.commit ? 1 : 0, {}, d.commit_vc);

  auto it = prepared_.find(txn);
  if (it == prepared_.end()) {
    auto pit = std::find_if(parked_prepares_.begin(), parked_prepares_.end(),
                            [&](const ParkedPrepare& pp) { return pp.msg.txn == txn; });
    if (pit != parked_prepares_.end()) {
      sim_.cancel(pit->timeout);
      parked_prepares_.erase(pit);
    } else {
      trace(TraceKind::kDecide, txn, std::nullopt, std::nullopt, -1, "unknown txn");
    }
    if (!d.commit) decided_abort_.insert(txn);
    return;
  }

  if (d.commit) {
    node_vc_.join_with(d.commit_vc);
    if (!it->second.local_writes.empty()) {
      for (auto& e : commit_q_) {
        if (e.txn == txn) {
          e.vc = d.commit_vc;
          e.status = CommitStatus::kReady;
        }
      }
      sort_commit_queue();
      try_commit_head();
    } else {
      locks_.release(txn);
      prepared_.erase(it);
      retry_parked_prepares();
    }
  } else {
    std::erase_if(commit_q_, [&](const CommitQueueEntry& e) { return e.txn == txn; });
    locks_.release(txn);
    prepared_.erase(it);
    decided_abort_.insert(txn);
    try_commit_head();
    retry_parked_prepares();
  }
}

void Node::try_commit_head() {
  bool any = false;
  while (!commit_q_.empty() && commit_q_.front().status == CommitStatus::kReady) {
    CommitQueueEntry head = std::move(commit_q_.front());
    commit_q_.erase(commit_q_.begin());
    auto pit = prepared_.find(head.txn);
    Prepared prep = std::move(pit->second);
    prepared_.erase(pit);

    for (const auto& w : prep.local_writes) {
      auto& versions = store_.at(w.key);
      std::uint64_t counter = versions.back().counter + 1;
      versions.push_back(Version{w.value, head.vc, head.txn, counter});
      if (opts_.version_history && versions.size() > *opts_.version_history) {
        // never drop the newest released version: read-only reads fall back to it
        std::size_t excess = versions.size() - *opts_.version_history;
        std::size_t newest_released = 0;
        for (std::size_t v = 0; v < versions.size(); ++v) {
          if (is_released(versions[v].writer)) newest_released = v;
        }
        excess = std::min(excess, newest_released);
        versions.erase(versions.begin(), versions.begin() + static_cast<std::ptrdiff_t>(excess));
      }
      trace(TraceKind::kInstall, head.txn, w.key, head.txn, static_cast<std::int64_t>(counter), {},
            head.vc);
    }
    nlog_.push_back(NLogEntry{head.txn, head.vc, head.write_keys});
    locks_.release(head.txn);

    PreCommit pc{prep.coordinator, head.vc, head.write_keys, sim_.now()};
    start_precommit(head.txn, std::move(pc), prep.propagated);
    any = true;
  }
  if (any) retry_parked_prepares();
}

void Node::start_precommit(const TxnId& txn, PreCommit pc,
                           const std::vector<SnapshotQueueEntry>& propagated) {
  const std::uint64_t sid = pc.vc[id_];
  for (Key k : pc.keys) {
    auto& q = squeues_[k];
    q.insert(SnapshotQueueEntry{txn, sid, EntryKind::kWrite}, sim_.now());
    trace(TraceKind::kEnqueue, txn, k, std::nullopt, static_cast<std::int64_t>(sid), "W");
    for (const auto& e : propagated) {
      if (is_removed(e.txn)) continue;
      if (q.insert(SnapshotQueueEntry{e.txn, e.insertion_snapshot, EntryKind::kRead}, sim_.now())) {
        ro_keys_[e.txn].insert(k);
        trace(TraceKind::kEnqueue, e.txn, k, txn, static_cast<std::int64_t>(e.insertion_snapshot),
              "R");
      }
    }
  }
  precommit_[txn] = std::move(pc);
  end_precommit(txn);
}

void Node::end_precommit(const TxnId& txn) {
  auto it = precommit_.find(txn);
  if (it == precommit_.end()) return;
  const PreCommit& pc = it->second;
  const std::uint64_t sid = pc.vc[id_];
  for (Key k : pc.keys) {
    auto qit = squeues_.find(k);
    if (qit == squeues_.end()) continue;
    // Any reader queued on the key holds the writer: it either read before the
    // install or skipped this version as unreleased.
    if (!qit->second.ro_entries.empty()) return;
  }
  for (Key k : pc.keys) {
    auto qit = squeues_.find(k);
    if (qit == squeues_.end()) continue;
    if (qit->second.erase(txn, EntryKind::kWrite)) {
      trace(TraceKind::kDequeue, txn, k, std::nullopt, static_cast<std::int64_t>(sid), "W");
    }
    if (qit->second.empty()) squeues_.erase(qit);
  }
  Time wait = sim_.now() - pc.installed_at;
  trace(TraceKind::kAckSent, txn, std::nullopt, std::nullopt, wait);
  send(pc.coordinator, txn, Ack{sid, pc.installed_at, wait});
  precommit_.erase(it);
}

void Node::recheck_precommits() {
  std::vector<TxnId> ids;
  ids.reserve(precommit_.size());
  for (const auto& [t, pc] : precommit_) ids.push_back(t);
  for (const auto& t : ids) end_precommit(t);
}

// ---------------------------------------------------------------------------
// Remove

void Node::on_remove(const Message& msg) {
  const TxnId& txn = msg.txn;
  removed_.insert(txn);

  if (auto it = ro_keys_.find(txn); it != ro_keys_.end()) {
    for (Key k : it->second) {
      auto qit = squeues_.find(k);
      if (qit == squeues_.end()) continue;
      if (qit->second.erase(txn, EntryKind::kRead)) {
        trace(TraceKind::kRemoveApplied, txn, k);
      }
      if (qit->second.empty()) squeues_.erase(qit);
    }
    ro_keys_.erase(it);
  }
  std::erase_if(parked_reads_, [&](const ParkedRead& p) { return p.msg.txn == txn; });

  if (auto pit = propagated_to_.find(txn); pit != propagated_to_.end()) {
    auto& done = forwarded_[txn];
    for (NodeId dest : pit->second) {
      if (dest == id_ || !done.insert(dest).second) continue;
      trace(TraceKind::kRemoveForward, txn, std::nullopt, TxnId{dest, 0});
      send(dest, txn, Remove{});
    }
    propagated_to_.erase(pit);
  }
  recheck_precommits();
}

// ---------------------------------------------------------------------------
// Introspection

bool Node::quiescent_clean() const {
  return squeues_.empty() && locks_.empty() && commit_q_.empty() && prepared_.empty() &&
         parked_prepares_.empty() && parked_reads_.empty() && precommit_.empty();
}

std::vector<std::string> Node::check_invariants() const {
  std::vector<std::string> bad;
  auto where = "node " + std::to_string(id_) + ": ";
  for (std::size_t k = 1; k < nlog_.size(); ++k) {
    if (nlog_[k].vc[id_] < nlog_[k - 1].vc[id_]) {
      bad.push_back(where + "nlog entry " + std::to_string(k) + " decreases own entry");
    }
  }
  if (node_vc_[id_] < most_recent_vc()[id_]) bad.push_back(where + "NodeVC behind NLog");
  for (std::size_t k = 1; k < commit_q_.size(); ++k) {
    const auto& a = commit_q_[k - 1];
    const auto& b = commit_q_[k];
    const bool tie_misordered =
        a.vc[id_] == b.vc[id_] &&
        (a.status != b.status ? a.status == CommitStatus::kReady : b.txn < a.txn);
    if (a.vc[id_] > b.vc[id_] || tie_misordered) {
      bad.push_back(where + "commit queue out of order");
    }
  }
  if (!locks_.well_formed()) bad.push_back(where + "key locked shared and exclusive");
  for (const auto& [k, q] : squeues_) {
    if (!q.sorted()) bad.push_back(where + "snapshot-queue of key " + std::to_string(k) + " unsorted");
    for (const auto& w : q.up_entries) {
      const auto& versions = store_.at(k);
      bool installed = std::any_of(versions.begin(), versions.end(),
                                   [&](const Version& v) { return v.writer == w.entry.txn; });
      if (!installed) {
        bad.push_back(where + "W entry of " + w.entry.txn.to_string() + " without installed version");
      }
    }
  }
  for (const auto& [k, versions] : store_) {
    for (std::size_t v = 1; v < versions.size(); ++v) {
      if (versions[v].vc[id_] < versions[v - 1].vc[id_]) {
        bad.push_back(where + "version chain of key " + std::to_string(k) + " out of order");
      }
    }
  }
  return bad;
}

}  // namespace sss
