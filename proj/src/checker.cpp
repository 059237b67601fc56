#include "sss/checker.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>

#include <json.hpp>

namespace sss {

const char* to_string(EdgeType t) {
  switch (t) {
    case EdgeType::kWr: return "wr";
    case EdgeType::kWw: return "ww";
    case EdgeType::kRw: return "rw";
    case EdgeType::kExt: return "ext";
  }
  return "?";
}

std::string Edge::to_string() const {
  std::string s = from.to_string() + " -" + sss::to_string(type);
  if (key) s += "(" + std::to_string(*key) + ")";
  return s + "-> " + to.to_string();
}

// ---------------------------------------------------------------- history

History History::from_trace(const Trace& trace) { return from_records(trace.records()); }

History History::from_records(const std::vector<TraceRecord>& records) {
  std::map<TxnId, TxnHistory> all;
  std::map<Key, std::map<NodeId, std::vector<TxnId>>> per_replica;

  auto txn_of = [&](const TraceRecord& r) -> TxnHistory& {
    auto it = all.find(r.txn);
    if (it == all.end()) {
      throw CheckerError("event for transaction " + r.txn.to_string() + " before its begin: " +
                         to_ndjson_line(r));
    }
    return it->second;
  };

  for (const auto& r : records) {
    switch (r.kind) {
      case TraceKind::kBegin: {
        TxnHistory t;
        t.id = r.txn;
        t.is_update = r.num != 0;
        t.begin = r.time;
        if (!all.emplace(r.txn, std::move(t)).second) {
          throw CheckerError("transaction " + r.txn.to_string() + " began twice");
        }
        break;
      }
      case TraceKind::kRead: {
        if (!r.key || !r.other) throw CheckerError("read without key or writer: " + to_ndjson_line(r));
        txn_of(r).reads.push_back(ObservedRead{*r.key, *r.other, r.node});
        break;
      }
      case TraceKind::kInstall: {
        if (!r.key) throw CheckerError("install without key: " + to_ndjson_line(r));
        per_replica[*r.key][r.node].push_back(r.txn);
        auto& w = txn_of(r).writes;
        if (std::find(w.begin(), w.end(), *r.key) == w.end()) w.push_back(*r.key);
        break;
      }
      case TraceKind::kReply: {
        auto& t = txn_of(r);
        t.committed = true;
        t.reply = r.time;
        break;
      }
      case TraceKind::kAbort:
        txn_of(r).aborted = true;
        break;
      default:
        break;
    }
  }

  History h;
  for (auto& [key, replicas] : per_replica) {
    const std::vector<TxnId>* agreed = nullptr;
    for (const auto& [node, seq] : replicas) {
      if (agreed && *agreed != seq) {
        throw CheckerError("replicas of key " + std::to_string(key) +
                           " installed versions in different orders");
      }
      agreed = &seq;
    }
    for (const TxnId& w : *agreed) {
      const auto& t = all.at(w);
      if (!t.committed) {
        throw CheckerError("key " + std::to_string(key) + " holds a version of uncommitted " +
                           w.to_string());
      }
    }
    h.installs.emplace(key, *agreed);
  }
  for (auto& [id, t] : all) {
    if (t.committed && t.aborted) throw CheckerError(id.to_string() + " both committed and aborted");
    if (!t.committed) continue;
    for (const auto& rd : t.reads) {
      if (rd.writer == kInitialWriter) continue;
      auto it = h.installs.find(rd.key);
      bool known = it != h.installs.end() &&
                   std::find(it->second.begin(), it->second.end(), rd.writer) != it->second.end();
      if (!known) {
        throw CheckerError(id.to_string() + " read key " + std::to_string(rd.key) +
                           " from unknown version of " + rd.writer.to_string());
      }
    }
    h.txns.push_back(std::move(t));
  }
  return h;
}

History History::project(const std::function<bool(const TxnHistory&)>& keep) const {
  History out;
  out.installs = installs;
  for (const auto& t : txns) {
    if (t.is_update || keep(t)) out.txns.push_back(t);
  }
  return out;
}

const TxnHistory* History::find(const TxnId& id) const {
  auto it = std::lower_bound(txns.begin(), txns.end(), id,
                             [](const TxnHistory& t, const TxnId& x) { return t.id < x; });
  return it != txns.end() && it->id == id ? &*it : nullptr;
}

std::size_t History::update_count() const {
  return static_cast<std::size_t>(
      std::count_if(txns.begin(), txns.end(), [](const TxnHistory& t) { return t.is_update; }));
}

// -------------------------------------------------------------------- dsg

namespace {

Time ext_target(const TxnHistory& t, ExtOrder ext) {
  return ext == ExtOrder::kRealTime ? t.begin : t.reply;
}

}  // namespace

Dsg::Dsg(const History& h, ExtOrder ext) : ext_(ext), txns_(h.txns) {
  for (std::uint32_t i = 0; i < txns_.size(); ++i) index_.emplace(txns_[i].id, i);

  std::set<std::tuple<std::uint32_t, std::uint32_t, EdgeType, Key>> seen;
  auto add = [&](const TxnId& a, const TxnId& b, EdgeType type, Key key) {
    if (a == b || a == kInitialWriter) return;
    auto ia = index_.find(a), ib = index_.find(b);
    // projections drop read-only txns, never writers
    if (ia == index_.end() || ib == index_.end()) return;
    if (!seen.emplace(ia->second, ib->second, type, key).second) return;
    conflict_.push_back(Edge{a, b, type, key});
    conflict_idx_.emplace_back(ia->second, ib->second);
  };

  for (const auto& [key, seq] : h.installs) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) add(seq[i], seq[i + 1], EdgeType::kWw, key);
  }
  for (const auto& t : txns_) {
    for (const auto& rd : t.reads) {
      add(rd.writer, t.id, EdgeType::kWr, rd.key);
      auto it = h.installs.find(rd.key);
      if (it == h.installs.end()) continue;
      const auto& seq = it->second;
      std::size_t next = 0;
      if (rd.writer != kInitialWriter) {
        next = static_cast<std::size_t>(std::find(seq.begin(), seq.end(), rd.writer) - seq.begin()) + 1;
      }
      if (next < seq.size()) add(t.id, seq[next], EdgeType::kRw, rd.key);
    }
  }
}

std::map<EdgeType, std::uint64_t> Dsg::edge_counts() const {
  std::map<EdgeType, std::uint64_t> out{
      {EdgeType::kWr, 0}, {EdgeType::kWw, 0}, {EdgeType::kRw, 0}, {EdgeType::kExt, 0}};
  for (const auto& e : conflict_) ++out[e.type];
  std::vector<Time> targets;
  for (const auto& t : txns_) targets.push_back(ext_target(t, ext_));
  std::sort(targets.begin(), targets.end());
  for (const auto& t : txns_) {
    auto it = std::upper_bound(targets.begin(), targets.end(), t.reply);
    out[EdgeType::kExt] += static_cast<std::uint64_t>(targets.end() - it);
  }
  return out;
}

bool Dsg::has_edge(const TxnId& from, const TxnId& to, EdgeType t) const {
  if (t == EdgeType::kExt) {
    auto a = index_.find(from), b = index_.find(to);
    if (a == index_.end() || b == index_.end()) return false;
    return txns_[a->second].reply < ext_target(txns_[b->second], ext_);
  }
  return std::any_of(conflict_.begin(), conflict_.end(), [&](const Edge& e) {
    return e.from == from && e.to == to && e.type == t;
  });
}

// Ext edges go through one virtual node per distinct target time. The virtual
// nodes form a chain in time order, so Ti reaches Tj through them exactly when
// reply(Ti) < target(Tj), with O(n) arcs instead of O(n^2).
std::vector<std::vector<Dsg::Arc>> Dsg::adjacency() const {
  const auto n = static_cast<std::uint32_t>(txns_.size());
  std::vector<Time> times;
  for (const auto& t : txns_) times.push_back(ext_target(t, ext_));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const auto m = static_cast<std::uint32_t>(times.size());

  std::vector<std::vector<Arc>> adj(n + m);
  for (std::size_t i = 0; i < conflict_.size(); ++i) {
    const auto& [a, b] = conflict_idx_[i];
    adj[a].push_back(Arc{b, conflict_[i].type, conflict_[i].key});
  }
  for (std::uint32_t k = 0; k + 1 < m; ++k) adj[n + k].push_back(Arc{n + k + 1, EdgeType::kExt, {}});
  for (std::uint32_t i = 0; i < n; ++i) {
    const Time target = ext_target(txns_[i], ext_);
    auto k = static_cast<std::uint32_t>(std::lower_bound(times.begin(), times.end(), target) - times.begin());
    adj[n + k].push_back(Arc{i, EdgeType::kExt, {}});
    auto after = static_cast<std::uint32_t>(
        std::upper_bound(times.begin(), times.end(), txns_[i].reply) - times.begin());
    if (after < m) adj[i].push_back(Arc{n + after, EdgeType::kExt, {}});
  }
  return adj;
}

std::optional<std::vector<Edge>> Dsg::find_cycle() const {
  const auto adj = adjacency();
  const auto n = static_cast<std::uint32_t>(txns_.size());
  enum : std::uint8_t { kWhite, kGray, kBlack };
  std::vector<std::uint8_t> color(adj.size(), kWhite);

  struct Frame {
    std::uint32_t node;
    std::size_t next_arc;
  };
  for (std::uint32_t root = 0; root < adj.size(); ++root) {
    if (color[root] != kWhite) continue;
    std::vector<Frame> stack{{root, 0}};
    std::vector<const Arc*> via;  // via[i] is the arc from stack[i] to stack[i+1]
    color[root] = kGray;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_arc == adj[f.node].size()) {
        color[f.node] = kBlack;
        stack.pop_back();
        if (!via.empty()) via.pop_back();
        continue;
      }
      const Arc& arc = adj[f.node][f.next_arc++];
      if (color[arc.to] == kWhite) {
        color[arc.to] = kGray;
        via.push_back(&arc);
        stack.push_back(Frame{arc.to, 0});
        continue;
      }
      if (color[arc.to] != kGray) continue;

      // back arc: the cycle is stack[start..] plus this arc
      std::size_t start = 0;
      while (stack[start].node != arc.to) ++start;
      std::vector<std::pair<std::uint32_t, const Arc*>> path;
      for (std::size_t i = start; i < via.size(); ++i) path.emplace_back(stack[i].node, via[i]);
      path.emplace_back(stack.back().node, &arc);

      // rotate to a real transaction and fold virtual hops into ext edges
      auto first_real = std::find_if(path.begin(), path.end(), [&](const auto& p) { return p.first < n; });
      std::rotate(path.begin(), first_real, path.end());
      std::vector<Edge> cycle;
      std::uint32_t from = path.front().first;
      bool through_virtual = false;
      for (const auto& [src, a] : path) {
        if (a->to >= n) {
          through_virtual = true;
          continue;
        }
        cycle.push_back(Edge{txns_[from].id, txns_[a->to].id,
                             through_virtual ? EdgeType::kExt : a->type,
                             through_virtual ? std::nullopt : a->key});
        from = a->to;
        through_virtual = false;
      }
      return cycle;
    }
  }
  return std::nullopt;
}

std::optional<std::vector<TxnId>> Dsg::topological_order() const {
  const auto adj = adjacency();
  const auto n = static_cast<std::uint32_t>(txns_.size());
  std::vector<std::uint32_t> indeg(adj.size(), 0);
  for (const auto& arcs : adj) {
    for (const auto& a : arcs) ++indeg[a.to];
  }
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  for (std::uint32_t i = 0; i < adj.size(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<TxnId> order;
  std::size_t visited = 0;
  while (!ready.empty()) {
    std::uint32_t u = ready.top();
    ready.pop();
    ++visited;
    if (u < n) order.push_back(txns_[u].id);
    for (const auto& a : adj[u]) {
      if (--indeg[a.to] == 0) ready.push(a.to);
    }
  }
  if (visited != adj.size()) return std::nullopt;
  return order;
}

Dsg build_dsg(const History& h, ExtOrder ext) { return Dsg(h, ext); }

std::optional<std::vector<Edge>> detect_cycle(const Dsg& g) { return g.find_cycle(); }

// ------------------------------------------------------------ brute force

std::optional<std::vector<TxnId>> brute_force_external_order(const History& h, ExtOrder ext,
                                                             std::size_t limit) {
  const std::size_t n = h.txns.size();
  if (n > limit) {
    throw CheckerError("brute-force search refuses " + std::to_string(n) + " transactions (limit " +
                       std::to_string(limit) + ")");
  }
  std::vector<std::vector<bool>> before(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      before[i][j] = i != j && h.txns[i].reply < ext_target(h.txns[j], ext);
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t a = 0; a < n && ok; ++a) {
      for (std::size_t b = a + 1; b < n && ok; ++b) ok = !before[perm[b]][perm[a]];
    }
    if (!ok) continue;

    std::map<Key, TxnId> latest;
    std::map<Key, std::size_t> install_pos;
    for (std::size_t idx = 0; idx < n && ok; ++idx) {
      const TxnHistory& t = h.txns[perm[idx]];
      for (const auto& rd : t.reads) {
        auto it = latest.find(rd.key);
        const TxnId& seen = it == latest.end() ? kInitialWriter : it->second;
        if (seen != rd.writer) {
          ok = false;
          break;
        }
      }
      for (Key k : t.writes) {
        if (!ok) break;
        const auto& seq = h.installs.at(k);
        std::size_t& pos = install_pos[k];
        if (pos >= seq.size() || seq[pos] != t.id) {
          ok = false;
          break;
        }
        ++pos;
        latest[k] = t.id;
      }
    }
    if (!ok) continue;
    std::vector<TxnId> order;
    for (std::size_t i : perm) order.push_back(h.txns[i].id);
    return order;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::nullopt;
}

// ----------------------------------------------------------------- report

std::string CheckReport::to_json() const {
  nlohmann::json j;
  j["consistent"] = consistent;
  j["transactions"] = txns;
  nlohmann::json e = nlohmann::json::object();
  for (const auto& [type, count] : edges) e[to_string(type)] = count;
  j["edges"] = e;
  nlohmann::json c = nlohmann::json::array();
  for (const auto& edge : cycle) {
    nlohmann::json x{{"from", edge.from.to_string()}, {"to", edge.to.to_string()},
                     {"type", to_string(edge.type)}};
    if (edge.key) x["key"] = *edge.key;
    c.push_back(x);
  }
  j["cycle"] = c;
  if (!error.empty()) j["error"] = error;
  return j.dump(2);
}

CheckReport check_trace(const Trace& trace, ExtOrder ext) {
  CheckReport rep;
  try {
    History h = History::from_trace(trace);
    Dsg g(h, ext);
    rep.txns = g.size();
    rep.edges = g.edge_counts();
    if (auto cyc = g.find_cycle()) {
      rep.cycle = std::move(*cyc);
    } else {
      rep.consistent = true;
    }
  } catch (const CheckerError& e) {
    rep.error = e.what();
  }
  return rep;
}

}  // namespace sss
