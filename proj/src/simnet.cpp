#include "sss/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sss {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

}  // namespace

LatencyModel LatencyModel::parse(const std::string& text) {
  auto parts = split(text, ':');
  if (parts.empty()) throw ConfigError("empty latency model");
  auto num = [&](const std::string& s, auto conv) {
    try {
      std::size_t used = 0;
      auto v = conv(s, &used);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw ConfigError("bad number '" + s + "' in latency model '" + text + "'");
  };
  auto ticks = [](const std::string& s, std::size_t* used) { return std::stoll(s, used); };
  auto real = [](const std::string& s, std::size_t* used) { return std::stod(s, used); };

  LatencyModel m;
  if (parts[0] == "fixed" && parts.size() == 2) {
    m.kind = Kind::kFixed;
    m.fixed = num(parts[1], ticks);
  } else if (parts[0] == "uniform" && parts.size() == 3) {
    m.kind = Kind::kUniform;
    m.min = num(parts[1], ticks);
    m.max = num(parts[2], ticks);
    if (m.min > m.max) throw ConfigError("uniform latency min > max");
  } else if (parts[0] == "lognormal" && parts.size() == 3) {
    m.kind = Kind::kLognormal;
    m.mu = num(parts[1], real);
    m.sigma = num(parts[2], real);
  } else {
    throw ConfigError("bad latency model '" + text + "'");
  }
  if (m.fixed < 0 || m.min < 0) throw ConfigError("negative latency");
  return m;
}

std::string LatencyModel::to_string() const {
  switch (kind) {
    case Kind::kFixed: return "fixed:" + std::to_string(fixed);
    case Kind::kUniform: return "uniform:" + std::to_string(min) + ":" + std::to_string(max);
    case Kind::kLognormal: {
      std::ostringstream os;
      os << "lognormal:" << mu << ":" << sigma;
      return os.str();
    }
  }
  return "?";
}

Simulator::Simulator(SimConfig cfg, std::uint32_t num_nodes)
    : cfg_(cfg), num_nodes_(num_nodes), procs_(num_nodes, nullptr), rng_(cfg.seed) {}

void Simulator::attach(NodeId node, Process* p) { procs_.at(node) = p; }

Time Simulator::sample_latency() {
  switch (cfg_.latency.kind) {
    case LatencyModel::Kind::kFixed: return cfg_.latency.fixed;
    case LatencyModel::Kind::kUniform:
      return std::uniform_int_distribution<Time>(cfg_.latency.min, cfg_.latency.max)(rng_);
    case LatencyModel::Kind::kLognormal: {
      double v = std::lognormal_distribution<double>(cfg_.latency.mu, cfg_.latency.sigma)(rng_);
      return std::max<Time>(1, static_cast<Time>(std::llround(v)));
    }
  }
  return 1;
}

void Simulator::record(TraceRecord r) {
  r.time = now_;
  trace_.add(std::move(r));
}

void Simulator::send(Message msg) {
  if (msg.from >= num_nodes_ || msg.to >= num_nodes_) {
    throw ConfigError("message names node outside the cluster");
  }
  ++messages_sent_;
  int cls = cfg_.priority_preemption ? msg.priority() : 0;
  if (cfg_.trace_messages) {
    record({.kind = TraceKind::kSend, .node = msg.from, .txn = msg.txn,
            .other = TxnId{msg.to, 0}, .detail = to_string(msg.kind())});
  }
  if (cfg_.drop_rate > 0.0 &&
      std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.drop_rate) {
    record({.kind = TraceKind::kDrop, .node = msg.from, .txn = msg.txn,
            .other = TxnId{msg.to, 0}, .detail = to_string(msg.kind())});
    return;
  }
  Time lat = (cfg_.zero_latency_self && msg.from == msg.to) ? 0 : sample_latency();
  // per-(channel, class) FIFO: never deliver before an earlier send on the same lane
  auto& tail = channel_tail_[{msg.from, msg.to, msg.priority()}];
  Time at = std::max(now_ + lat, tail);
  tail = at;
  Event e;
  e.at = at;
  e.cls = cls;
  e.seq = seq_++;
  e.node = msg.to;
  e.msg = std::move(msg);
  queue_.push(std::move(e));
}

TimerId Simulator::schedule(NodeId node, Time delay, std::function<void()> fn) {
  TimerId id = next_timer_++;
  timers_.emplace(id, std::move(fn));
  Event e;
  e.at = now_ + std::max<Time>(0, delay);
  e.cls = 4;
  e.seq = seq_++;
  e.timer = id;
  e.node = node;
  queue_.push(std::move(e));
  return id;
}

void Simulator::cancel(TimerId id) { timers_.erase(id); }

RunReport Simulator::run(const StopCondition& stop) {
  RunReport rep;
  while (!queue_.empty()) {
    if (stop.until && queue_.top().at > *stop.until) {
      now_ = *stop.until;
      break;
    }
    if (stop.max_events && rep.events >= *stop.max_events) break;

    Event e = queue_.top();
    queue_.pop();
    now_ = e.at;
    if (e.msg) {
      ++rep.events;
      ++messages_delivered_;
      if (cfg_.trace_messages) {
        record({.kind = TraceKind::kDeliver, .node = e.msg->to, .txn = e.msg->txn,
                .other = TxnId{e.msg->from, 0}, .detail = to_string(e.msg->kind())});
      }
      if (Process* p = procs_.at(e.node)) p->on_message(*e.msg);
    } else {
      auto it = timers_.find(e.timer);
      if (it == timers_.end()) continue;  // cancelled
      ++rep.events;
      auto fn = std::move(it->second);
      timers_.erase(it);
      fn();
    }
    if (++events_since_progress_ > cfg_.livelock_events) {
      rep.livelock = true;
      rep.diagnostic = "no transaction progress for " + std::to_string(cfg_.livelock_events) +
                       " events at t=" + std::to_string(now_) + ", " +
                       std::to_string(queue_.size()) + " events pending";
      break;
    }
    if (stop.predicate && stop.predicate()) break;
  }
  rep.end_time = now_;
  rep.quiescent = queue_.empty();
  return rep;
}

}  // namespace sss
