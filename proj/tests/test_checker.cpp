#include <random>

#include <gtest/gtest.h>

#include "sss/checker.hpp"
#include "sss/workload.hpp"

namespace sss {
namespace {

constexpr Key kX = 0, kY = 1;

/// Hand-built histories in trace form, so reconstruction is exercised too.
class HistoryBuilder {
 public:
  TxnId begin(std::uint64_t seq, bool update, Time at) {
    TxnId id{0, seq};
    add({.time = at, .kind = TraceKind::kBegin, .txn = id, .num = update ? 1 : 0});
    return id;
  }
  void read(const TxnId& t, Key k, const TxnId& writer, Time at) {
    add({.time = at, .kind = TraceKind::kRead, .txn = t, .key = k, .other = writer});
  }
  void install(const TxnId& t, Key k, Time at, NodeId node = 0) {
    add({.time = at, .kind = TraceKind::kInstall, .node = node, .txn = t, .key = k, .other = t});
  }
  void reply(const TxnId& t, Time at) {
    add({.time = at, .kind = TraceKind::kReply, .txn = t, .num = 1});
  }
  History history() const { return History::from_records(records_); }
  const std::vector<TraceRecord>& records() const { return records_; }

 private:
  void add(TraceRecord r) { records_.push_back(std::move(r)); }
  std::vector<TraceRecord> records_;
};

// Two writers on different keys and two readers that each see one write but
// not the other: a long fork.
History fig4_history(bool fork) {
  HistoryBuilder b;
  TxnId t1 = b.begin(1, false, 0), t4 = b.begin(4, false, 0);
  TxnId t2 = b.begin(2, true, 1), t3 = b.begin(3, true, 1);
  b.read(t1, kX, kInitialWriter, 2);
  b.read(t4, kY, kInitialWriter, 2);
  b.install(t2, kX, 3);
  b.install(t3, kY, 3);
  b.reply(t2, 4);
  b.reply(t3, 4);
  b.read(t1, kY, fork ? t3 : kInitialWriter, 5);
  b.read(t4, kX, fork ? t2 : kInitialWriter, 5);
  b.reply(t1, 6);
  b.reply(t4, 6);
  return b.history();
}

TEST(Checker, LongForkIsACycle) {
  History h = fig4_history(true);
  Dsg g = build_dsg(h);
  auto cyc = detect_cycle(g);
  ASSERT_TRUE(cyc);
  EXPECT_EQ(cyc->size(), 4u);
  EXPECT_FALSE(brute_force_external_order(h));
}

TEST(Checker, ReadersBeforeBothWritersIsAcyclic) {
  History h = fig4_history(false);
  Dsg g = build_dsg(h);
  EXPECT_FALSE(detect_cycle(g));
  auto order = g.topological_order();
  ASSERT_TRUE(order);
  auto pos = [&](std::uint64_t seq) {
    return std::find(order->begin(), order->end(), TxnId{0, seq}) - order->begin();
  };
  EXPECT_LT(pos(1), pos(2));
  EXPECT_LT(pos(1), pos(3));
  EXPECT_LT(pos(4), pos(2));
  EXPECT_LT(pos(4), pos(3));
  EXPECT_TRUE(brute_force_external_order(h));
}

// A read-only transaction reads y's initial version while a writer commits y.
History fig3_history(Time reader_begin) {
  HistoryBuilder b;
  TxnId t2 = b.begin(2, true, 100);
  b.install(t2, kY, 200);
  b.reply(t2, 300);
  TxnId t1 = b.begin(1, false, reader_begin);
  b.read(t1, kY, kInitialWriter, 400);
  b.reply(t1, 500);
  return b.history();
}

TEST(Checker, ConcurrentReaderSerializesBeforeWriter) {
  History h = fig3_history(0);
  Dsg g = build_dsg(h);
  EXPECT_TRUE(g.has_edge({0, 1}, {0, 2}, EdgeType::kRw));
  EXPECT_FALSE(detect_cycle(g));
  auto order = brute_force_external_order(h);
  ASSERT_TRUE(order);
  EXPECT_EQ(*order, (std::vector<TxnId>{{0, 1}, {0, 2}}));
}

TEST(Checker, StaleReadAfterWriterRepliedIsTwoCycle) {
  History h = fig3_history(350);  // the reader begins after the writer replied
  Dsg g = build_dsg(h);
  auto cyc = detect_cycle(g);
  ASSERT_TRUE(cyc);
  ASSERT_EQ(cyc->size(), 2u);
  std::set<EdgeType> types{(*cyc)[0].type, (*cyc)[1].type};
  EXPECT_EQ(types, (std::set<EdgeType>{EdgeType::kRw, EdgeType::kExt}));
  EXPECT_EQ((*cyc)[0].to, (*cyc)[1].from);
  EXPECT_EQ((*cyc)[1].to, (*cyc)[0].from);
  EXPECT_FALSE(brute_force_external_order(h));
}

TEST(Checker, ExtOrderChoiceMatters) {
  // Under reply order the reader, replying last, must follow the writer.
  History h = fig3_history(0);
  EXPECT_FALSE(detect_cycle(build_dsg(h, ExtOrder::kRealTime)));
  EXPECT_TRUE(detect_cycle(build_dsg(h, ExtOrder::kReplyOrder)));
}

TEST(Checker, ChainOfReadModifyWritesIsAcyclic) {
  HistoryBuilder b;
  TxnId prev = kInitialWriter;
  std::vector<TxnId> ids;
  for (std::uint64_t i = 1; i <= 6; ++i) {
    const Time t0 = static_cast<Time>(i) * 100;
    TxnId t = b.begin(i, true, t0);
    b.read(t, kX, prev, t0 + 10);
    b.install(t, kX, t0 + 20);
    b.reply(t, t0 + 30);
    ids.push_back(prev = t);
  }
  History h = b.history();
  Dsg g = build_dsg(h);
  EXPECT_FALSE(detect_cycle(g));
  EXPECT_EQ(g.topological_order(), ids);
  EXPECT_EQ(brute_force_external_order(h), ids);
  auto counts = g.edge_counts();
  EXPECT_EQ(counts[EdgeType::kWr], 5u);
  EXPECT_EQ(counts[EdgeType::kWw], 5u);
}

TEST(Checker, MalformedHistoriesAreReported) {
  {
    HistoryBuilder b;
    TxnId t = b.begin(1, true, 0);
    b.install(t, kX, 1);  // never replies
    EXPECT_THROW(b.history(), CheckerError);
  }
  {
    HistoryBuilder b;
    TxnId a = b.begin(1, true, 0), c = b.begin(2, true, 0);
    b.install(a, kX, 1, 0);
    b.install(c, kX, 2, 0);
    b.install(c, kX, 1, 1);
    b.install(a, kX, 2, 1);
    b.reply(a, 3);
    b.reply(c, 3);
    EXPECT_THROW(b.history(), CheckerError);
  }
  {
    HistoryBuilder b;
    TxnId r = b.begin(1, false, 0);
    b.read(r, kX, TxnId{3, 3}, 1);
    b.reply(r, 2);
    EXPECT_THROW(b.history(), CheckerError);
    Trace t;
    for (const auto& rec : b.records()) t.add(rec);
    CheckReport rep = check_trace(t);
    EXPECT_FALSE(rep.consistent);
    EXPECT_FALSE(rep.error.empty());
  }
  EXPECT_THROW(brute_force_external_order(fig4_history(false), ExtOrder::kRealTime, 3), CheckerError);
}

// Random small histories, most of them inconsistent: the graph search and the
// exhaustive search must agree on every one.
TEST(Checker, CycleSearchAgreesWithBruteForce) {
  std::mt19937_64 rng(41);
  int cyclic = 0, acyclic = 0;
  for (int round = 0; round < 2000; ++round) {
    const std::size_t n = 2 + rng() % 5;
    const Key keys = 1 + rng() % 3;
    std::vector<TxnHistory> txns(n);
    std::map<Key, std::vector<TxnId>> installs;
    for (std::size_t i = 0; i < n; ++i) {
      auto& t = txns[i];
      t.id = TxnId{0, i + 1};
      t.is_update = rng() % 2;
      t.committed = true;
      t.begin = static_cast<Time>(rng() % 50);
      t.reply = t.begin + 1 + static_cast<Time>(rng() % 50);
      if (t.is_update) {
        for (Key k = 0; k < keys; ++k) {
          if (rng() % 2) {
            t.writes.push_back(k);
            installs[k].push_back(t.id);
          }
        }
      }
    }
    for (auto& [k, seq] : installs) std::shuffle(seq.begin(), seq.end(), rng);
    for (auto& t : txns) {
      for (Key k = 0; k < keys; ++k) {
        if (rng() % 3 == 0) continue;
        std::vector<TxnId> choices{kInitialWriter};
        for (const auto& w : installs[k]) {
          if (w != t.id) choices.push_back(w);
        }
        t.reads.push_back(ObservedRead{k, choices[rng() % choices.size()], 0});
      }
    }
    History h;
    h.txns = txns;
    for (auto& [k, seq] : installs) {
      if (!seq.empty()) h.installs[k] = seq;
    }
    const bool has_cycle = detect_cycle(build_dsg(h)).has_value();
    const bool has_order = brute_force_external_order(h).has_value();
    ASSERT_NE(has_cycle, has_order) << "round " << round;
    (has_cycle ? cyclic : acyclic)++;
  }
  EXPECT_GT(cyclic, 100);
  EXPECT_GT(acyclic, 100);
}

// Negative control: read-only transactions of the baseline that skip
// validation read unsynchronized snapshots, and the checker must notice.
TEST(Checker, CatchesUnvalidatedBaselineReads) {
  bool caught = false;
  for (std::uint64_t seed = 1; seed <= 10 && !caught; ++seed) {
    WorkloadConfig cfg;
    cfg.num_nodes = 4;
    cfg.num_keys = 20;
    cfg.read_only_pct = 50;
    cfg.ro_txn_len = 4;
    cfg.txn_budget = 400;
    cfg.seed = seed;
    cfg.protocol = Protocol::kBaseline2pc;
    cfg.baseline_ro_validation = false;
    BenchResult res = run_benchmark(cfg, true);
    ASSERT_TRUE(res.report.check);
    EXPECT_TRUE(res.report.check->error.empty()) << res.report.check->error;
    caught = !res.report.check->consistent;
  }
  EXPECT_TRUE(caught);
}

}  // namespace
}  // namespace sss
