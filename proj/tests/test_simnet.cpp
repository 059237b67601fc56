#include <gtest/gtest.h>

#include "sss/simnet.hpp"

namespace sss {
namespace {

struct Delivery {
  Time at;
  Message msg;
};

class Recorder : public Process {
 public:
  explicit Recorder(Simulator& sim) : sim_(sim) {}
  void on_message(const Message& msg) override { got.push_back({sim_.now(), msg}); }
  std::vector<Delivery> got;

 private:
  Simulator& sim_;
};

Message msg(NodeId from, NodeId to, std::uint64_t seq, Payload p = Remove{}) {
  return Message{from, to, TxnId{from, seq}, std::move(p)};
}

SimConfig fixed(Time latency, std::uint64_t seed = 1) {
  SimConfig c;
  c.seed = seed;
  c.latency = LatencyModel::fixed_ticks(latency);
  return c;
}

TEST(Simulator, FixedLatencyDeliversAtSendPlusLatency) {
  Simulator sim(fixed(1), 2);
  Recorder a(sim), b(sim);
  sim.attach(0, &a);
  sim.attach(1, &b);
  sim.schedule(0, 5, [&] { sim.send(msg(0, 1, 1)); });
  RunReport r = sim.run();
  ASSERT_EQ(b.got.size(), 1u);
  EXPECT_EQ(b.got[0].at, 6);
  EXPECT_TRUE(r.quiescent);
}

TEST(Simulator, LinksAreFifoUnderRandomLatency) {
  SimConfig c;
  c.latency = LatencyModel::uniform_ticks(1, 500);
  Simulator sim(c, 2);
  Recorder a(sim), b(sim);
  sim.attach(0, &a);
  sim.attach(1, &b);
  for (std::uint64_t i = 1; i <= 200; ++i) sim.send(msg(0, 1, i, Ack{i, 0, 0}));
  sim.run();
  ASSERT_EQ(b.got.size(), 200u);
  for (std::uint64_t i = 0; i < 200; ++i) EXPECT_EQ(b.got[i].msg.txn.seq, i + 1);
}

TEST(Simulator, RemoveDeliveredBeforeSameInstantReadRequest) {
  Simulator sim(fixed(10), 3);
  Recorder a(sim), b(sim), c(sim);
  sim.attach(0, &a);
  sim.attach(1, &b);
  sim.attach(2, &c);
  // Sent in the "wrong" order from different peers; both land at t=10.
  sim.send(msg(0, 1, 1, ReadRequest{}));
  sim.send(msg(2, 1, 2, Remove{}));
  sim.run();
  ASSERT_EQ(b.got.size(), 2u);
  EXPECT_EQ(b.got[0].at, b.got[1].at);
  EXPECT_EQ(b.got[0].msg.kind(), MessageKind::kRemove);
  EXPECT_EQ(b.got[1].msg.kind(), MessageKind::kReadRequest);
}

TEST(Simulator, SameInstantTiesFollowSchedulingOrder) {
  Simulator sim(fixed(10), 3);
  Recorder a(sim), b(sim), c(sim);
  sim.attach(0, &a);
  sim.attach(1, &b);
  sim.attach(2, &c);
  sim.send(msg(2, 1, 1, Vote{}));
  sim.send(msg(0, 1, 2, Vote{}));
  sim.run();
  ASSERT_EQ(b.got.size(), 2u);
  EXPECT_EQ(b.got[0].msg.from, 2u);
  EXPECT_EQ(b.got[1].msg.from, 0u);
}

Trace random_run(std::uint64_t seed) {
  SimConfig c;
  c.seed = seed;
  Simulator sim(c, 4);
  std::vector<std::unique_ptr<Recorder>> procs;
  for (NodeId n = 0; n < 4; ++n) {
    procs.push_back(std::make_unique<Recorder>(sim));
    sim.attach(n, procs.back().get());
  }
  for (std::uint64_t i = 1; i <= 100; ++i) {
    const auto from = static_cast<NodeId>(sim.rng()() % 4);
    const auto to = static_cast<NodeId>(sim.rng()() % 4);
    sim.schedule(from, sim.rng()() % 300, [&sim, from, to, i] { sim.send(msg(from, to, i, Ack{i, 0, 0})); });
  }
  sim.run();
  return sim.trace();
}

TEST(Simulator, SameSeedSameTrace) {
  EXPECT_EQ(random_run(3).digest(), random_run(3).digest());
  EXPECT_NE(random_run(3).digest(), random_run(4).digest());
}

TEST(Simulator, NoDropsMeansExactlyOnceDelivery) {
  SimConfig c;
  c.seed = 9;
  Simulator sim(c, 3);
  Recorder r0(sim), r1(sim), r2(sim);
  Recorder* rs[] = {&r0, &r1, &r2};
  for (NodeId n = 0; n < 3; ++n) sim.attach(n, rs[n]);
  std::uint64_t sent = 0;
  for (NodeId f = 0; f < 3; ++f) {
    for (NodeId t = 0; t < 3; ++t) {
      for (int i = 0; i < 20; ++i) sim.send(msg(f, t, ++sent, Decide{}));
    }
  }
  sim.run();
  std::set<std::uint64_t> seen;
  for (auto* r : rs) {
    for (const auto& d : r->got) EXPECT_TRUE(seen.insert(d.msg.txn.seq).second);
  }
  EXPECT_EQ(seen.size(), sent);
  EXPECT_EQ(sim.messages_sent(), sent);
  EXPECT_EQ(sim.messages_delivered(), sent);
}

TEST(Simulator, DropsAreRecorded) {
  SimConfig c = fixed(5);
  c.drop_rate = 0.5;
  Simulator sim(c, 2);
  Recorder a(sim), b(sim);
  sim.attach(0, &a);
  sim.attach(1, &b);
  for (std::uint64_t i = 1; i <= 200; ++i) sim.send(msg(0, 1, i, Vote{}));
  sim.run();
  std::size_t drops = 0;
  for (const auto& r : sim.trace().records()) drops += r.kind == TraceKind::kDrop;
  EXPECT_EQ(drops + b.got.size(), 200u);
  EXPECT_GT(drops, 50u);
  EXPECT_LT(drops, 150u);
}

TEST(Simulator, EmptyRunIsQuiescent) {
  Simulator sim(fixed(1), 2);
  RunReport r = sim.run();
  EXPECT_TRUE(r.quiescent);
  EXPECT_FALSE(r.livelock);
  EXPECT_EQ(r.events, 0u);
}

TEST(Simulator, CancelledTimerNeverFires) {
  Simulator sim(fixed(1), 1);
  int fired = 0;
  TimerId t = sim.schedule(0, 10, [&] { ++fired; });
  sim.schedule(0, 20, [&] { fired += 10; });
  sim.cancel(t);
  sim.run();
  EXPECT_EQ(fired, 10);
}

TEST(Simulator, StopsAtUntil) {
  Simulator sim(fixed(1), 1);
  int fired = 0;
  sim.schedule(0, 10, [&] { ++fired; });
  sim.schedule(0, 30, [&] { ++fired; });
  RunReport r = sim.run(StopCondition{.until = 20});
  EXPECT_EQ(fired, 1);
  EXPECT_FALSE(r.quiescent);
}

TEST(Simulator, LivelockWithoutProgress) {
  SimConfig c = fixed(1);
  c.livelock_events = 1000;
  Simulator sim(c, 1);
  std::function<void()> spin = [&] { sim.schedule(0, 1, spin); };
  sim.schedule(0, 1, spin);
  RunReport r = sim.run();
  EXPECT_TRUE(r.livelock);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(LatencyModel, ParseRoundTrip) {
  for (const char* s : {"fixed:100", "uniform:50:150"}) {
    EXPECT_EQ(LatencyModel::parse(s).to_string(), s);
  }
  EXPECT_EQ(LatencyModel::parse("lognormal:4.5:0.3").kind, LatencyModel::Kind::kLognormal);
  EXPECT_THROW(LatencyModel::parse("gaussian:1"), ConfigError);
  EXPECT_THROW(LatencyModel::parse("fixed:abc"), ConfigError);
  EXPECT_THROW(LatencyModel::parse("uniform:5:1"), ConfigError);
}

}  // namespace
}  // namespace sss
