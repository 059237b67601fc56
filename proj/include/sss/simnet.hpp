#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sss/core_types.hpp"
#include "sss/trace.hpp"

namespace sss {

struct LatencyModel {
  enum class Kind { kFixed, kUniform, kLognormal };
  Kind kind = Kind::kUniform;
  Time fixed = 100;
  Time min = 50;
  Time max = 150;
  double mu = 4.5;  // lognormal, in log-ticks
  double sigma = 0.3;

  static LatencyModel fixed_ticks(Time t) {
    LatencyModel m;
    m.kind = Kind::kFixed;
    m.fixed = t;
    return m;
  }
  static LatencyModel uniform_ticks(Time lo, Time hi) {
    LatencyModel m;
    m.kind = Kind::kUniform;
    m.min = lo;
    m.max = hi;
    return m;
  }
  /// "fixed:100", "uniform:50:150", "lognormal:4.5:0.3"
  static LatencyModel parse(const std::string& text);
  std::string to_string() const;
};

struct SimConfig {
  std::uint64_t seed = 1;
  LatencyModel latency;
  double drop_rate = 0.0;
  bool priority_preemption = true;
  /// Messages a node sends to itself skip the network.
  bool zero_latency_self = true;
  /// Record kSend/kDeliver events for every message.
  bool trace_messages = true;
  /// Events without a committed transaction before the run is declared livelocked.
  std::uint64_t livelock_events = 1'000'000;
};

class Process {
 public:
  virtual ~Process() = default;
  virtual void on_message(const Message& msg) = 0;
};

using TimerId = std::uint64_t;

struct StopCondition {
  std::optional<Time> until;
  std::optional<std::uint64_t> max_events;
  /// Evaluated after every event; true stops the run.
  std::function<bool()> predicate;
};

struct RunReport {
  std::uint64_t events = 0;
  Time end_time = 0;
  bool quiescent = false;
  bool livelock = false;
  std::string diagnostic;
};

class LivelockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic discrete-event message fabric. Single-threaded; events at
/// equal time are ordered by priority class then by scheduling order.
class Simulator {
 public:
  Simulator(SimConfig cfg, std::uint32_t num_nodes);

  void attach(NodeId node, Process* p);

  Time now() const { return now_; }
  const SimConfig& config() const { return cfg_; }
  std::uint32_t num_nodes() const { return num_nodes_; }

  void send(Message msg);
  TimerId schedule(NodeId node, Time delay, std::function<void()> fn);
  void cancel(TimerId id);

  /// Called by protocol code when a transaction finishes; resets the
  /// livelock counter.
  void note_progress() { events_since_progress_ = 0; }

  RunReport run(const StopCondition& stop = {});
  bool idle() const { return queue_.empty(); }
  std::uint64_t pending_events() const { return queue_.size(); }

  std::mt19937_64& rng() { return rng_; }
  Trace& trace() { return trace_; }
  const Trace& trace() const { return trace_; }
  void record(TraceRecord r);

  std::uint64_t messages_sent() const { return messages_sent_; }
  std::uint64_t messages_delivered() const { return messages_delivered_; }

 private:
  struct Event {
    Time at = 0;
    int cls = 0;
    std::uint64_t seq = 0;
    std::optional<Message> msg;
    TimerId timer = 0;
    NodeId node = 0;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      if (a.cls != b.cls) return a.cls > b.cls;
      return a.seq > b.seq;
    }
  };

  Time sample_latency();

  SimConfig cfg_;
  std::uint32_t num_nodes_;
  std::vector<Process*> procs_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<TimerId, std::function<void()>> timers_;
  std::map<std::tuple<NodeId, NodeId, int>, Time> channel_tail_;
  std::mt19937_64 rng_;
  Trace trace_;
  Time now_ = 0;
  std::uint64_t seq_ = 0;
  TimerId next_timer_ = 1;
  std::uint64_t events_since_progress_ = 0;
  std::uint64_t messages_sent_ = 0;
  std::uint64_t messages_delivered_ = 0;
};

}  // namespace sss
