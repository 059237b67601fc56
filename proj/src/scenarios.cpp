#include "sss/scenarios.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "sss/cluster.hpp"

namespace sss {

namespace {

constexpr Time kHop = 100;

std::vector<std::string> split_lines(const char* text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

/// Drives a hand-written schedule against a cluster whose every message,
/// including a node's messages to itself, takes exactly one hop.
class Script {
 public:
  Script(std::uint32_t nodes, std::map<Key, std::vector<NodeId>> placements,
         std::map<Key, std::string> key_names)
      : cluster_(make_config(nodes, placements)), key_names_(std::move(key_names)) {}

  Cluster& cluster() { return cluster_; }
  Node& node(NodeId n) { return *cluster_.site(n).sss_node(); }

  void at(Time t, std::function<void()> fn) { cluster_.sim().schedule(0, t, std::move(fn)); }

  void begin(const std::string& name, NodeId home, bool update) {
    TxnId id = cluster_.site(home).coordinator().begin(update);
    ids_[name] = id;
    names_[id] = name;
  }
  void read(const std::string& name, Key key) {
    coord(name).read(ids_.at(name), key, [](std::optional<Value>) {});
  }
  void write(const std::string& name, Key key, Value v) {
    coord(name).write(ids_.at(name), key, std::move(v));
  }
  void commit(const std::string& name) {
    coord(name).commit(ids_.at(name), [](bool) {});
  }

  ScenarioResult finish(std::string scenario, const char* expected) {
    cluster_.sim().run();
    ScenarioResult r;
    r.name = std::move(scenario);
    r.trace = cluster_.sim().trace();
    r.txns = ids_;
    r.expected = split_lines(expected);
    for (const auto& rec : r.trace.records()) {
      if (auto line = render(rec)) r.transcript.push_back(*line);
    }
    r.check = check_trace(r.trace);
    r.checks.push_back({"checker finds the history consistent", r.check.consistent,
                        r.check.consistent ? "" : r.check.to_json()});
    r.checks.push_back({"cluster quiescent with empty queues and lock tables",
                        cluster_.quiescent_clean(), ""});
    return r;
  }

  std::string name(const TxnId& id) const {
    if (id.is_initial()) return "init";
    auto it = names_.find(id);
    return it == names_.end() ? id.to_string() : it->second;
  }
  std::string key_name(Key k) const {
    auto it = key_names_.find(k);
    return it == key_names_.end() ? std::to_string(k) : it->second;
  }

 private:
  static ClusterConfig make_config(std::uint32_t nodes, const std::map<Key, std::vector<NodeId>>& pl) {
    ClusterConfig cfg;
    cfg.placement.num_nodes = nodes;
    cfg.placement.num_keys = static_cast<std::uint32_t>(pl.size());
    cfg.placement.replication_degree = 1;
    cfg.placement.explicit_placements = pl;
    cfg.sim.latency = LatencyModel::fixed_ticks(kHop);
    cfg.sim.zero_latency_self = false;
    return cfg;
  }

  Coordinator& coord(const std::string& name) {
    return cluster_.site(ids_.at(name).origin).coordinator();
  }

  // Messages are summarised by the state changes they cause; only Remove
  // deliveries are kept because the schedules are defined relative to them.
  std::optional<std::string> render(const TraceRecord& rec) const {
    if (rec.kind == TraceKind::kSend) return std::nullopt;
    if (rec.kind == TraceKind::kDeliver && rec.detail != "Remove") return std::nullopt;
    std::ostringstream s;
    s << rec.time << " N" << rec.node + 1 << ' ' << to_string(rec.kind) << ' ' << name(rec.txn);
    if (rec.key) s << ' ' << key_name(*rec.key);
    if (rec.other) {
      const bool peer = rec.kind == TraceKind::kRemoveForward || rec.kind == TraceKind::kDeliver;
      s << ' ' << (peer ? "N" + std::to_string(rec.other->origin + 1) : name(*rec.other));
    }
    if (rec.num != 0) s << " n=" << rec.num;
    if (!rec.vc.empty()) s << ' ' << rec.vc.to_string();
    if (!rec.detail.empty() && rec.kind != TraceKind::kDeliver) s << ' ' << rec.detail;
    return s.str();
  }

  Cluster cluster_;
  std::map<Key, std::string> key_names_;
  std::map<std::string, TxnId> ids_;
  std::map<TxnId, std::string> names_;
};

const TraceRecord* find_record(const ScenarioResult& r, TraceKind kind, const std::string& txn,
                               std::function<bool(const TraceRecord&)> extra = {}) {
  const TxnId id = r.txns.at(txn);
  for (const auto& rec : r.trace.records()) {
    if (rec.kind == kind && rec.txn == id && (!extra || extra(rec))) return &rec;
  }
  return nullptr;
}

// Position in the trace; ties in simulated time are broken by event order.
std::ptrdiff_t index_of(const ScenarioResult& r, const TraceRecord* rec) {
  return rec == nullptr ? -1 : rec - r.trace.records().data();
}

bool strictly_after(const ScenarioResult& r, const TraceRecord* later, const TraceRecord* earlier) {
  return later && earlier && later->time > earlier->time && index_of(r, later) > index_of(r, earlier);
}

std::string describe(const TraceRecord* rec) {
  return rec ? to_ndjson_line(*rec) : std::string("missing");
}

const char* kFig3Expected = R"(
0 N1 begin T1
100 N2 enqueue T1 y n=7 R
150 N2 begin T2 n=1
200 N2 read T1 y init
250 N2 lock T2
250 N2 vote T2 n=1 [3,8]
450 N2 decide T2 n=1 [3,8]
450 N2 install T2 y T2 n=1 [3,8]
450 N2 enqueue T2 y n=8 W
600 N1 reply T1 n=1
700 N2 deliver T1 N1
700 N2 remove T1 y
700 N2 dequeue T2 y n=8 W
700 N2 ack_sent T2 n=250
800 N2 release T2 n=1
800 N2 reply T2 n=1
900 N1 release T2
900 N2 release T2
)";

const char* kFig4Expected = R"(
0 N1 begin T1
0 N4 begin T4
50 N2 begin T2 n=1
50 N3 begin T3 n=1
100 N2 enqueue T1 x n=7 R
100 N3 enqueue T4 y n=10 R
150 N2 lock T2
150 N2 vote T2 n=1 [5,8,5,5]
150 N3 lock T3
150 N3 vote T3 n=1 [5,5,11,5]
200 N2 read T1 x init
200 N3 read T4 y init
350 N2 decide T2 n=1 [5,8,5,5]
350 N2 install T2 x T2 n=1 [5,8,5,5]
350 N2 enqueue T2 x n=8 W
350 N3 decide T3 n=1 [5,5,11,5]
350 N3 install T3 y T3 n=1 [5,5,11,5]
350 N3 enqueue T3 y n=11 W
500 N3 enqueue T1 y n=11 R
500 N3 hold T1 y T3 local
500 N2 enqueue T4 x n=8 R
500 N2 hold T4 x T2 local
600 N3 read T1 y init
600 N2 read T4 x init
700 N1 reply T1 n=1
700 N4 reply T4 n=1
800 N2 deliver T1 N1
800 N2 remove T1 x
800 N3 deliver T1 N1
800 N3 remove T1 y
800 N2 deliver T4 N4
800 N2 remove T4 x
800 N2 dequeue T2 x n=8 W
800 N2 ack_sent T2 n=450
800 N3 deliver T4 N4
800 N3 remove T4 y
800 N3 dequeue T3 y n=11 W
800 N3 ack_sent T3 n=450
900 N2 release T2 n=1
900 N2 reply T2 n=1
900 N3 release T3 n=1
900 N3 reply T3 n=1
1000 N1 release T2
1000 N2 release T2
1000 N3 release T2
1000 N4 release T2
1000 N1 release T3
1000 N2 release T3
1000 N3 release T3
1000 N4 release T3
)";

const char* kTransitiveExpected = R"(
0 N1 begin Tro
100 N1 enqueue Tro a R
200 N1 read Tro a init
200 N2 begin Tw n=1
400 N1 read Tw a init
550 N1 lock Tw
550 N1 vote Tw n=1 [1,0,0]
550 N2 lock Tw
550 N2 vote Tw n=1 [0,1,0]
750 N1 decide Tw n=1 [1,1,0]
750 N1 install Tw a Tw n=1 [1,1,0]
750 N1 enqueue Tw a n=1 W
750 N2 decide Tw n=1 [1,1,0]
750 N2 install Tw b Tw n=1 [1,1,0]
750 N2 enqueue Tw b n=1 W
750 N2 enqueue Tro b Tw R
900 N3 begin Tw' n=1
1100 N2 read Tw' b Tw
1250 N2 lock Tw'
1250 N2 vote Tw' n=1 [1,1,0]
1250 N3 lock Tw'
1250 N3 vote Tw' n=1 [0,0,1]
1450 N2 decide Tw' n=1 [1,1,1]
1450 N3 decide Tw' n=1 [1,1,1]
1450 N3 install Tw' c Tw' n=1 [1,1,1]
1450 N3 enqueue Tw' c n=1 W
1450 N3 enqueue Tro c Tw' R
1600 N1 reply Tro n=1
1700 N1 deliver Tro N1
1700 N1 remove Tro a
1700 N1 remove_forward Tro N2
1700 N1 dequeue Tw a n=1 W
1700 N1 ack_sent Tw n=950
1800 N2 deliver Tro N1
1800 N2 remove Tro b
1800 N2 remove_forward Tro N1
1800 N2 remove_forward Tro N3
1800 N2 dequeue Tw b n=1 W
1800 N2 ack_sent Tw n=1050
1900 N1 deliver Tro N2
1900 N3 deliver Tro N2
1900 N3 remove Tro c
1900 N3 dequeue Tw' c n=1 W
1900 N3 ack_sent Tw' n=450
1900 N2 release Tw n=1
1900 N2 reply Tw n=1
2000 N1 release Tw
2000 N2 release Tw
2000 N3 release Tw
2000 N3 release Tw' n=1
2000 N3 reply Tw' n=1
2100 N1 release Tw'
2100 N2 release Tw'
2100 N3 release Tw'
)";

ScenarioResult fig3() {
  // x lives on N1 and y on N2; NodeVCs start at [5,4] and [3,7].
  Script s(2, {{0, {0}}, {1, {1}}}, {{0, "x"}, {1, "y"}});
  s.node(0).seed_clock(VectorClock{5, 4});
  s.node(1).seed_clock(VectorClock{3, 7});

  s.at(0, [&] {
    s.begin("T1", 0, false);
    s.read("T1", 1);
  });
  s.at(150, [&] {
    s.begin("T2", 1, true);
    s.write("T2", 1, "y1");
    s.commit("T2");
  });
  s.at(600, [&] { s.commit("T1"); });
  ScenarioResult r = s.finish("fig3", kFig3Expected);

  const TraceRecord* decide = find_record(r, TraceKind::kDecide, "T2");
  r.checks.push_back({"T2 commit clock is [3,8]", decide && decide->vc == VectorClock{3, 8},
                      describe(decide)});
  const TraceRecord* enq = find_record(r, TraceKind::kEnqueue, "T1", [](const TraceRecord& x) {
    return x.node == 1 && x.key == Key{1} && x.detail == "R";
  });
  r.checks.push_back({"T1 enters Q(y) on N2 with insertion snapshot 7", enq && enq->num == 7,
                      describe(enq)});
  const TraceRecord* w = find_record(r, TraceKind::kEnqueue, "T2", [](const TraceRecord& x) {
    return x.detail == "W";
  });
  r.checks.push_back({"T2 enters Q(y) with insertion snapshot 8", w && w->num == 8, describe(w)});
  const TraceRecord* rd = find_record(r, TraceKind::kRead, "T1");
  r.checks.push_back({"T1 reads the value of y that precedes T2",
                      rd && rd->other && rd->other->is_initial(), describe(rd)});
  const TraceRecord* remove = find_record(r, TraceKind::kDeliver, "T1", [](const TraceRecord& x) {
    return x.detail == "Remove" && x.node == 1;
  });
  const TraceRecord* reply = find_record(r, TraceKind::kReply, "T2");
  r.checks.push_back({"T2's client reply strictly after Remove(T1) reaches N2",
                      strictly_after(r, reply, remove), describe(remove) + " / " + describe(reply)});
  return r;
}

ScenarioResult fig4() {
  // Stock prices x on N2 and y on N3; T1..T4 start on N1..N4.
  Script s(4, {{0, {1}}, {1, {2}}}, {{0, "x"}, {1, "y"}});
  s.node(0).seed_clock(VectorClock{5, 5, 5, 5});
  s.node(1).seed_clock(VectorClock{5, 7, 5, 5});
  s.node(2).seed_clock(VectorClock{5, 5, 10, 5});
  s.node(3).seed_clock(VectorClock{5, 5, 5, 5});

  s.at(0, [&] {
    s.begin("T1", 0, false);
    s.read("T1", 0);
    s.begin("T4", 3, false);
    s.read("T4", 1);
  });
  s.at(50, [&] {
    s.begin("T2", 1, true);
    s.write("T2", 0, "70");
    s.commit("T2");
    s.begin("T3", 2, true);
    s.write("T3", 1, "75");
    s.commit("T3");
  });
  s.at(400, [&] {
    s.read("T1", 1);
    s.read("T4", 0);
  });
  s.at(700, [&] {
    s.commit("T1");
    s.commit("T4");
  });
  ScenarioResult r = s.finish("fig4", kFig4Expected);

  auto read_of = [&](const std::string& txn, Key key) {
    return find_record(r, TraceKind::kRead, txn, [key](const TraceRecord& x) { return x.key == key; });
  };
  const TraceRecord* t1y = read_of("T1", 1);
  r.checks.push_back({"T1 returns y0, not y1", t1y && t1y->other && t1y->other->is_initial(),
                      describe(t1y)});
  const TraceRecord* t4x = read_of("T4", 0);
  r.checks.push_back({"T4 returns x0, not x1", t4x && t4x->other && t4x->other->is_initial(),
                      describe(t4x)});

  bool before = false;
  std::string order_text;
  try {
    auto order = build_dsg(History::from_trace(r.trace)).topological_order();
    if (order) {
      auto pos = [&](const std::string& n) {
        return std::find(order->begin(), order->end(), r.txns.at(n)) - order->begin();
      };
      before = std::max(pos("T1"), pos("T4")) < std::min(pos("T2"), pos("T3"));
      for (const auto& id : *order) order_text += id.to_string() + " ";
    }
  } catch (const CheckerError& e) {
    order_text = e.what();
  }
  r.checks.push_back({"T1 and T4 serialize before T2 and T3", before, order_text});
  return r;
}

ScenarioResult transitive() {
  // a on N1, b on N2, c on N3. Tro reads a; Tw overwrites a and writes b;
  // Tw' reads b and writes c. Tro's entry travels a -> b -> c, so its Remove
  // must be forwarded twice before Tw' may reply.
  Script s(3, {{0, {0}}, {1, {1}}, {2, {2}}}, {{0, "a"}, {1, "b"}, {2, "c"}});

  s.at(0, [&] {
    s.begin("Tro", 0, false);
    s.read("Tro", 0);
  });
  s.at(200, [&] {
    s.begin("Tw", 1, true);
    s.read("Tw", 0);
  });
  s.at(450, [&] {
    s.write("Tw", 0, "a1");
    s.write("Tw", 1, "b1");
    s.commit("Tw");
  });
  s.at(900, [&] {
    s.begin("Tw'", 2, true);
    s.read("Tw'", 1);
  });
  s.at(1150, [&] {
    s.write("Tw'", 2, "c1");
    s.commit("Tw'");
  });
  s.at(1600, [&] { s.commit("Tro"); });
  ScenarioResult r = s.finish("transitive", kTransitiveExpected);

  const TraceRecord* carried = find_record(r, TraceKind::kEnqueue, "Tro", [](const TraceRecord& x) {
    return x.node == 2 && x.key == Key{2} && x.detail == "R";
  });
  r.checks.push_back({"Tro's entry is propagated into Q(c) on N3", carried != nullptr,
                      describe(carried)});
  auto forward = [&](NodeId from, NodeId to) {
    return find_record(r, TraceKind::kRemoveForward, "Tro", [=](const TraceRecord& x) {
      return x.node == from && x.other && x.other->origin == to;
    });
  };
  const TraceRecord* f12 = forward(0, 1);
  const TraceRecord* f23 = forward(1, 2);
  r.checks.push_back({"Remove(Tro) is forwarded N1 -> N2 -> N3", f12 && f23 && index_of(r, f12) < index_of(r, f23),
                      describe(f12) + " / " + describe(f23)});
  const TraceRecord* applied = find_record(r, TraceKind::kRemoveApplied, "Tro", [](const TraceRecord& x) {
    return x.node == 2;
  });
  const TraceRecord* reply = find_record(r, TraceKind::kReply, "Tw'");
  r.checks.push_back({"Tw' replies strictly after Remove(Tro) is processed on N3",
                      strictly_after(r, reply, applied), describe(applied) + " / " + describe(reply)});
  const TraceRecord* tw_reply = find_record(r, TraceKind::kReply, "Tw");
  r.checks.push_back({"Tw replies no later than Tw'", tw_reply && reply && tw_reply->time <= reply->time &&
                                                          index_of(r, tw_reply) < index_of(r, reply),
                      describe(tw_reply)});
  return r;
}

}  // namespace

std::string ScenarioResult::diff() const {
  const std::size_t n = std::max(transcript.size(), expected.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string got = i < transcript.size() ? transcript[i] : "<end>";
    const std::string want = i < expected.size() ? expected[i] : "<end>";
    if (got != want) {
      return "line " + std::to_string(i + 1) + ": expected '" + want + "', got '" + got + "'";
    }
  }
  return {};
}

bool ScenarioResult::ok() const {
  if (!diff().empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const ScenarioCheck& c) { return c.pass; });
}

std::vector<std::string> scenario_names() { return {"fig3", "fig4", "transitive"}; }

ScenarioResult run_scenario(const std::string& name) {
  if (name == "fig3") return fig3();
  if (name == "fig4") return fig4();
  if (name == "transitive") return transitive();
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

}  // namespace sss
