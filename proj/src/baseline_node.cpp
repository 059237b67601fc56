#include "sss/baseline_node.hpp"

#include <algorithm>
#include <stdexcept>

namespace sss {

BaselineNode::BaselineNode(NodeId id, const PartitionMap& pmap, Simulator& sim, Time lock_timeout)
    : id_(id), pmap_(pmap), sim_(sim), lock_timeout_(lock_timeout) {
  for (Key k : pmap.keys_on(id)) {
    store_.emplace(k, Version{Value{}, VectorClock(pmap.num_nodes()), kInitialWriter, 0});
  }
}

const Version* BaselineNode::current(Key k) const {
  auto it = store_.find(k);
  return it == store_.end() ? nullptr : &it->second;
}

void BaselineNode::handle(const Message& msg) {
  switch (msg.kind()) {
    case MessageKind::kReadRequest: on_read(msg); break;
    case MessageKind::kPrepare: on_prepare(msg); break;
    case MessageKind::kDecide: on_decide(msg); break;
    case MessageKind::kRemove: break;  // no snapshot-queues here
    default:
      throw std::logic_error(std::string("baseline node cannot handle ") + to_string(msg.kind()));
  }
}

void BaselineNode::on_read(const Message& msg) {
  const auto& rq = std::get<ReadRequest>(msg.payload);
  const Version& v = store_.at(rq.key);
  ReadReturn out;
  out.key = rq.key;
  out.read_seq = rq.read_seq;
  out.value = v.value;
  out.writer = v.writer;
  out.version_vc = v.vc;
  out.counter = v.counter;
  out.max_vc = VectorClock(pmap_.num_nodes());
  send(msg.from, msg.txn, std::move(out));
}

bool BaselineNode::validate(const std::vector<ReadItem>& rs) const {
  for (const auto& r : rs) {
    auto it = store_.find(r.key);
    if (it != store_.end() && it->second.counter != r.counter) return false;
  }
  return true;
}

void BaselineNode::on_prepare(const Message& msg) {
  if (decided_abort_.count(msg.txn)) {
    send(msg.from, msg.txn, Vote{VectorClock(pmap_.num_nodes()), false});
    return;
  }
  if (prepared_.count(msg.txn) || try_prepare(msg)) return;
  TxnId txn = msg.txn;
  TimerId t = sim_.schedule(id_, lock_timeout_, [this, txn] {
    auto it = std::find_if(parked_.begin(), parked_.end(),
                           [&](const Parked& p) { return p.msg.txn == txn; });
    if (it == parked_.end()) return;
    NodeId to = it->msg.from;
    parked_.erase(it);
    sim_.record({.kind = TraceKind::kLockTimeout, .node = id_, .txn = txn});
    send(to, txn, Vote{VectorClock(pmap_.num_nodes()), false});
  });
  parked_.push_back(Parked{msg, t});
}

bool BaselineNode::try_prepare(const Message& msg) {
  const auto& p = std::get<Prepare>(msg.payload);
  Prepared st;
  st.coordinator = msg.from;
  std::vector<Key> wkeys, rkeys;
  for (const auto& w : p.write_set) {
    if (pmap_.is_replica(w.key, id_)) {
      st.local_writes.push_back(w);
      wkeys.push_back(w.key);
    }
  }
  for (const auto& r : p.read_set) {
    if (pmap_.is_replica(r.key, id_) && std::find(wkeys.begin(), wkeys.end(), r.key) == wkeys.end()) {
      rkeys.push_back(r.key);
    }
  }
  if (!locks_.try_acquire(msg.txn, wkeys, rkeys)) return false;
  bool ok = validate(p.read_set);
  if (!ok) {
    locks_.release(msg.txn);
    send(msg.from, msg.txn, Vote{VectorClock(pmap_.num_nodes()), false});
    retry_parked();
    return true;
  }
  prepared_.emplace(msg.txn, std::move(st));
  send(msg.from, msg.txn, Vote{VectorClock(pmap_.num_nodes()), true});
  return true;
}

void BaselineNode::retry_parked() {
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (std::size_t i = 0; i < parked_.size(); ++i) {
      Parked p = parked_[i];
      parked_.erase(parked_.begin() + static_cast<std::ptrdiff_t>(i));
      if (try_prepare(p.msg)) {
        sim_.cancel(p.timeout);
        progressed = true;
        break;
      }
      parked_.insert(parked_.begin() + static_cast<std::ptrdiff_t>(i), std::move(p));
    }
  }
}

void BaselineNode::on_decide(const Message& msg) {
  const auto& d = std::get<Decide>(msg.payload);
  auto it = prepared_.find(msg.txn);
  if (it == prepared_.end()) {
    auto pit = std::find_if(parked_.begin(), parked_.end(),
                            [&](const Parked& p) { return p.msg.txn == msg.txn; });
    if (pit != parked_.end()) {
      sim_.cancel(pit->timeout);
      parked_.erase(pit);
    }
    if (!d.commit) decided_abort_[msg.txn] = true;
    return;
  }
  Prepared st = std::move(it->second);
  prepared_.erase(it);
  if (d.commit && !st.local_writes.empty()) {
    for (const auto& w : st.local_writes) {
      Version& v = store_.at(w.key);
      v.value = w.value;
      v.writer = msg.txn;
      v.counter += 1;
      sim_.record({.kind = TraceKind::kInstall, .node = id_, .txn = msg.txn, .key = w.key,
                   .other = msg.txn, .num = static_cast<std::int64_t>(v.counter)});
    }
    send(st.coordinator, msg.txn, Ack{0, sim_.now(), 0});
  }
  if (!d.commit) decided_abort_[msg.txn] = true;
  locks_.release(msg.txn);
  retry_parked();
}

}  // namespace sss
