#include "sss/coordinator.hpp"

#include <algorithm>
#include <stdexcept>

namespace sss {

const char* to_string(Protocol p) {
  return p == Protocol::kSss ? "sss" : "2pc-baseline";
}

std::optional<Protocol> parse_protocol(const std::string& s) {
  if (s == "sss") return Protocol::kSss;
  if (s == "2pc-baseline" || s == "2pc" || s == "baseline") return Protocol::kBaseline2pc;
  return std::nullopt;
}

VectorClock finalize_commit_vc(VectorClock joined, const std::set<NodeId>& write_replicas) {
  // every write replica adopts the same entry so the installs line up
  std::uint64_t xact_vn = 0;
  for (NodeId w : write_replicas) xact_vn = std::max(xact_vn, joined[w]);
  for (NodeId w : write_replicas) joined[w] = xact_vn;
  return joined;
}

Coordinator::Coordinator(NodeId self, const PartitionMap& pmap, Simulator& sim, Node* node,
                         CoordinatorOptions opts)
    : self_(self), pmap_(pmap), sim_(sim), node_(node), opts_(opts) {
  if (opts_.protocol == Protocol::kSss && node_ == nullptr) {
    throw ConfigError("SSS coordinator needs its colocated node");
  }
}

Coordinator::Record& Coordinator::get(const TxnId& txn) {
  auto it = txns_.find(txn);
  if (it == txns_.end()) throw std::logic_error("unknown or finished transaction " + txn.to_string());
  return it->second;
}

const TxnDescriptor* Coordinator::find(const TxnId& txn) const {
  auto it = txns_.find(txn);
  return it == txns_.end() ? nullptr : &it->second.desc;
}

VectorClock Coordinator::local_clock() const {
  return node_ ? node_->most_recent_vc() : VectorClock(pmap_.num_nodes());
}

void Coordinator::maybe_release(Record& r) {
  const auto s = r.desc.status;
  if (s != TxnStatus::kInternallyCommitted && s != TxnStatus::kPreCommit) return;
  if (r.releasing || !r.acks_pending.empty() || !r.late_holders.empty()) return;
  if (node_) {
    for (const auto& item : r.desc.read_set) {
      if (!node_->is_released(item.writer)) return;
    }
    r.releasing = true;
    trace(TraceKind::kRelease, r.desc.id, std::nullopt, std::nullopt, 1);
    for (NodeId n = 0; n < pmap_.num_nodes(); ++n) {
      sim_.send(Message{self_, n, r.desc.id, Release{r.commit_vc}});
    }
  }
  finish(r.desc.id, true);
}

void Coordinator::recheck_releases() {
  std::vector<TxnId> ids;
  for (const auto& [id, r] : txns_) {
    if (r.desc.is_update && !r.releasing) ids.push_back(id);
  }
  for (const auto& id : ids) {
    if (auto it = txns_.find(id); it != txns_.end()) maybe_release(it->second);
  }
}

void Coordinator::on_remove(const TxnId& reader) {
  bool any = false;
  for (auto& [id, r] : txns_) any |= r.late_holders.erase(reader) != 0;
  if (any) recheck_releases();
}

void Coordinator::on_release_notice(const TxnId&) { recheck_releases(); }

void Coordinator::on_hold_request(const Message& msg) {
  const auto& h = std::get<HoldRequest>(msg.payload);
  auto it = txns_.find(msg.txn);
  const bool granted = it != txns_.end() && !it->second.releasing &&
                       (it->second.desc.status == TxnStatus::kInternallyCommitted ||
                        it->second.desc.status == TxnStatus::kPreCommit);
  // A hold request can trail the reader's Remove on the self link; the reader
  // is finished then and must not pin the writer.
  const bool finished = node_ != nullptr && node_->is_removed(h.reader);
  if (granted && !finished) it->second.late_holders.insert(h.reader);
  sim_.send(Message{self_, msg.from, msg.txn, HoldReply{h.reader, granted}});
}

void Coordinator::trace(TraceKind kind, const TxnId& txn, std::optional<Key> key,
                        std::optional<TxnId> other, std::int64_t num, NodeId node_override) {
  sim_.record(TraceRecord{.kind = kind,
                          .node = node_override == static_cast<NodeId>(-1) ? self_ : node_override,
                          .txn = txn,
                          .key = key,
                          .other = other,
                          .num = num});
}

TxnId Coordinator::begin(bool is_update) {
  TxnId id{self_, next_seq_++};
  Record r;
  r.desc.id = id;
  r.desc.is_update = is_update;
  r.desc.coordinator = self_;
  r.desc.has_read.assign(pmap_.num_nodes(), false);
  if (is_update) {
    r.desc.vc = local_clock();
    r.desc.vc_assigned = true;
  } else {
    r.desc.vc = VectorClock(pmap_.num_nodes());
  }
  r.begin = sim_.now();
  txns_.emplace(id, std::move(r));
  trace(TraceKind::kBegin, id, std::nullopt, std::nullopt, is_update ? 1 : 0);
  return id;
}

void Coordinator::read(const TxnId& txn, Key key, ReadCont cont) {
  Record& r = get(txn);
  if (r.desc.status != TxnStatus::kActive) throw std::logic_error("read on inactive transaction");
  if (r.read) throw std::logic_error("transaction already has a read in flight");
  (void)pmap_.replicas(key);  // range check

  if (const Value* v = r.desc.buffered_write(key)) {
    Value copy = *v;
    sim_.schedule(self_, 0, [cont = std::move(cont), copy = std::move(copy)] { cont(copy); });
    return;
  }
  if (!r.desc.vc_assigned) {
    r.desc.vc = local_clock();
    r.desc.vc_assigned = true;
  }
  r.read = PendingRead{key, 0, std::move(cont), 0};
  send_read(r);
}

void Coordinator::send_read(Record& r) {
  PendingRead& pr = *r.read;
  pr.seq = r.next_read_seq++;
  ReadRequest rq;
  rq.key = pr.key;
  rq.vc = r.desc.vc;
  rq.has_read = r.desc.has_read;
  rq.is_update = r.desc.is_update || opts_.protocol == Protocol::kBaseline2pc;
  rq.read_seq = pr.seq;
  rq.held = r.held;
  for (NodeId n : pmap_.replicas(pr.key)) {
    sim_.send(Message{self_, n, r.desc.id, rq});
  }
  TxnId txn = r.desc.id;
  std::uint32_t seq = pr.seq;
  pr.timeout = sim_.schedule(self_, opts_.request_timeout, [this, txn, seq] {
    auto it = txns_.find(txn);
    if (it == txns_.end() || !it->second.read || it->second.read->seq != seq) return;
    Record& rec = it->second;
    if (rec.desc.is_update) {
      ReadCont cont = std::move(rec.read->cont);
      rec.read.reset();
      finish(txn, false);
      cont(std::nullopt);
    } else {
      send_read(rec);  // read-only transactions never abort
    }
  });
}

void Coordinator::write(const TxnId& txn, Key key, Value value) {
  Record& r = get(txn);
  if (!r.desc.is_update) throw std::logic_error("write on read-only transaction " + txn.to_string());
  if (r.desc.status != TxnStatus::kActive) throw std::logic_error("write on inactive transaction");
  (void)pmap_.replicas(key);
  r.desc.buffer_write(key, std::move(value));
}

void Coordinator::abort(const TxnId& txn) {
  Record& r = get(txn);
  if (!r.desc.is_update) throw std::logic_error("read-only transactions cannot abort");
  if (r.desc.status != TxnStatus::kActive) throw std::logic_error("abort after commit started");
  if (r.read) sim_.cancel(r.read->timeout);
  finish(txn, false);
}

void Coordinator::commit(const TxnId& txn, CommitCont cont) {
  Record& r = get(txn);
  if (r.desc.status != TxnStatus::kActive) throw std::logic_error("commit on inactive transaction");
  if (r.read) throw std::logic_error("commit with a read in flight");
  r.on_commit = std::move(cont);
  const bool baseline = opts_.protocol == Protocol::kBaseline2pc;

  if (!r.desc.is_update && (!baseline || !opts_.baseline_ro_validation)) {
    if (baseline) {
      finish(txn, true);
      return;
    }
    // every contacted replica may hold an R entry, including slower ones
    std::set<NodeId> targets;
    for (const auto& item : r.desc.read_set) {
      for (NodeId n : pmap_.replicas(item.key)) targets.insert(n);
    }
    // reply first, then clean up behind it
    const TxnId id = txn;
    finish(id, true);
    for (NodeId n : targets) sim_.send(Message{self_, n, id, Remove{}});
    return;
  }

  for (const auto& item : r.desc.read_set) {
    for (NodeId n : pmap_.replicas(item.key)) r.participants.insert(n);
  }
  for (const auto& w : r.desc.write_set) {
    for (NodeId n : pmap_.replicas(w.key)) {
      r.participants.insert(n);
      r.write_replicas.insert(n);
    }
  }
  r.participants.insert(self_);

  Prepare p;
  p.vc = r.desc.vc;
  p.read_set = r.desc.read_set;
  p.write_set = r.desc.write_set;
  p.is_update = r.desc.is_update;
  if (node_) {
    for (const auto& e : r.desc.propagated_set) {
      if (node_->is_removed(e.txn)) continue;
      p.propagated.push_back(e);
      for (NodeId w : r.write_replicas) node_->note_propagation(e.txn, w);
    }
  }

  r.desc.advance(TxnStatus::kPreparing);
  r.commit_vc = r.desc.vc;
  r.votes_pending = r.participants;
  for (NodeId n : r.participants) sim_.send(Message{self_, n, txn, p});
  r.vote_timer = sim_.schedule(self_, opts_.vote_timeout, [this, txn] {
    auto it = txns_.find(txn);
    if (it == txns_.end() || it->second.votes_pending.empty()) return;
    it->second.votes_ok = false;
    it->second.votes_pending.clear();
    decide(it->second);
  });
}

void Coordinator::on_message(const Message& msg) {
  switch (msg.kind()) {
    case MessageKind::kReadReturn: on_read_return(msg); break;
    case MessageKind::kVote: on_vote(msg); break;
    case MessageKind::kAck: on_ack(msg); break;
    case MessageKind::kHoldRequest: on_hold_request(msg); break;
    default:
      throw std::logic_error(std::string("coordinator cannot handle ") + to_string(msg.kind()));
  }
}

void Coordinator::on_read_return(const Message& msg) {
  const auto& rr = std::get<ReadReturn>(msg.payload);
  auto it = txns_.find(msg.txn);
  // slower replicas answer after the fastest one was taken
  if (it == txns_.end() || !it->second.read || it->second.read->seq != rr.read_seq) return;
  Record& r = it->second;
  r.desc.has_read.at(msg.from) = true;
  r.desc.vc.join_with(rr.max_vc);
  // The responder's latest clock need not cover the version it returned.
  if (!rr.version_vc.empty()) r.desc.vc.join_with(rr.version_vc);
  r.desc.read_set.push_back(ReadItem{rr.key, rr.writer, rr.version_vc, rr.counter});
  for (const auto& w : rr.held) {
    if (std::find(r.held.begin(), r.held.end(), w) == r.held.end()) r.held.push_back(w);
  }
  for (const auto& e : rr.propagated) {
    if (node_ && node_->is_removed(e.txn)) continue;
    bool present = std::any_of(r.desc.propagated_set.begin(), r.desc.propagated_set.end(),
                               [&](const SnapshotQueueEntry& x) { return x.txn == e.txn; });
    if (!present) r.desc.propagated_set.push_back(e);
  }
  trace(TraceKind::kRead, msg.txn, rr.key, rr.writer, 0, msg.from);
  sim_.cancel(r.read->timeout);
  ReadCont cont = std::move(r.read->cont);
  r.read.reset();
  cont(rr.value);
}

void Coordinator::on_vote(const Message& msg) {
  const auto& v = std::get<Vote>(msg.payload);
  auto it = txns_.find(msg.txn);
  if (it == txns_.end()) return;
  Record& r = it->second;
  if (r.desc.status != TxnStatus::kPreparing || r.votes_pending.erase(msg.from) == 0) return;
  if (!v.ok) {
    r.votes_ok = false;
  } else {
    r.commit_vc.join_with(v.prep_vc);
  }
  if (r.votes_pending.empty()) {
    sim_.cancel(r.vote_timer);
    decide(r);
  }
}

void Coordinator::decide(Record& r) {
  const TxnId txn = r.desc.id;
  if (!r.votes_ok) {
    for (NodeId n : r.participants) sim_.send(Message{self_, n, txn, Decide{r.commit_vc, false}});
    finish(txn, false);
    return;
  }
  r.commit_vc = finalize_commit_vc(r.commit_vc, r.write_replicas);
  r.desc.vc = r.commit_vc;

  for (NodeId n : r.participants) sim_.send(Message{self_, n, txn, Decide{r.commit_vc, true}});
  r.desc.advance(TxnStatus::kInternallyCommitted);
  r.acks_pending = r.write_replicas;
  if (r.acks_pending.empty()) r.internal_commit = sim_.now();
  maybe_release(r);
}

void Coordinator::on_ack(const Message& msg) {
  const auto& a = std::get<Ack>(msg.payload);
  auto it = txns_.find(msg.txn);
  if (it == txns_.end()) return;
  Record& r = it->second;
  if (r.acks_pending.erase(msg.from) == 0) return;
  if (r.desc.status == TxnStatus::kInternallyCommitted) r.desc.advance(TxnStatus::kPreCommit);
  r.internal_commit = std::max(r.internal_commit, a.installed_at);
  r.queue_wait = std::max(r.queue_wait, a.queue_wait);
  maybe_release(r);
}

void Coordinator::finish(const TxnId& txn, bool committed) {
  auto it = txns_.find(txn);
  Record r = std::move(it->second);
  txns_.erase(it);

  TxnOutcome out;
  out.id = txn;
  out.is_update = r.desc.is_update;
  out.committed = committed;
  out.begin = r.begin;
  out.end = sim_.now();
  if (committed) {
    r.desc.advance(TxnStatus::kExternallyCommitted);
    trace(TraceKind::kReply, txn, std::nullopt, std::nullopt, 1);
    sim_.note_progress();
    out.internal_commit = r.desc.is_update ? r.internal_commit : out.end;
    out.queue_wait = r.queue_wait;
  } else {
    if (r.desc.is_update) {
      r.desc.advance(TxnStatus::kAborted);
    } else if (opts_.protocol == Protocol::kBaseline2pc) {
      r.desc.status = TxnStatus::kAborted;  // baseline read-only txns validate and may abort
    } else {
      throw std::logic_error("SSS read-only transaction " + txn.to_string() + " aborted");
    }
    trace(TraceKind::kAbort, txn);
    out.internal_commit = out.end;
  }
  if (listener_) listener_(out);
  if (r.on_commit) {
    sim_.schedule(self_, 0, [cont = std::move(r.on_commit), committed] { cont(committed); });
  }
}

}  // namespace sss
