#include "sss/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sss {

// ------------------------------------------------------------------ config

void WorkloadConfig::validate() const {
  if (num_nodes == 0) throw ConfigError("num_nodes must be positive");
  if (num_keys == 0) throw ConfigError("num_keys must be positive");
  if (replication_degree == 0 || replication_degree > num_nodes) {
    throw ConfigError("replication_degree must be in [1, num_nodes]");
  }
  if (read_only_pct > 100) throw ConfigError("read_only_pct must be in [0, 100]");
  if (local_pct > 100) throw ConfigError("local_pct must be in [0, 100]");
  if (ro_txn_len == 0 || ro_txn_len > num_keys) throw ConfigError("ro_txn_len must be in [1, num_keys]");
  if (num_keys < 2 && read_only_pct < 100) throw ConfigError("update transactions need two keys");
  if (retry_backoff_min < 0 || retry_backoff_max < retry_backoff_min) {
    throw ConfigError("retry backoff range is empty");
  }
  if (drop_rate < 0.0 || drop_rate >= 1.0) throw ConfigError("drop_rate must be in [0, 1)");
}

ClusterConfig WorkloadConfig::cluster_config() const {
  ClusterConfig c;
  c.placement.num_nodes = num_nodes;
  c.placement.num_keys = num_keys;
  c.placement.replication_degree = replication_degree;
  c.placement.placement_seed = placement_seed.value_or(seed);
  c.placement.explicit_placements = placements;
  c.sim.seed = seed;
  c.sim.latency = latency;
  c.sim.drop_rate = drop_rate;
  c.sim.trace_messages = trace_messages;
  c.node = node;
  c.coordinator.protocol = protocol;
  c.coordinator.baseline_ro_validation = baseline_ro_validation;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
}

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
  auto x = parse_uint(key, v);
  if (x > 0xffffffffULL) throw ConfigError(key + " out of range");
  return static_cast<std::uint32_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

WorkloadConfig parse_workload_config(const std::string& text, WorkloadConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto time = [&] { return static_cast<Time>(parse_uint(key, val)); };

    if (key == "num_nodes") cfg.num_nodes = parse_u32(key, val);
    else if (key == "num_keys") cfg.num_keys = parse_u32(key, val);
    else if (key == "replication_degree") cfg.replication_degree = parse_u32(key, val);
    else if (key == "read_only_pct") cfg.read_only_pct = parse_u32(key, val);
    else if (key == "ro_txn_len") cfg.ro_txn_len = parse_u32(key, val);
    else if (key == "clients_per_node") cfg.clients_per_node = parse_u32(key, val);
    else if (key == "local_pct") cfg.local_pct = parse_u32(key, val);
    else if (key == "txn_budget" || key == "duration") cfg.txn_budget = parse_uint(key, val);
    else if (key == "seed") cfg.seed = parse_uint(key, val);
    else if (key == "placement_seed") cfg.placement_seed = parse_uint(key, val);
    else if (key == "key_distribution") {
      if (val == "uniform") {
        cfg.key_distribution = KeyDistribution::kUniform;
      } else if (val.rfind("local_mix", 0) == 0) {
        cfg.key_distribution = KeyDistribution::kLocalMix;
        if (val.size() > 9) {
          if (val[9] != ':' && val[9] != '(') throw ConfigError("bad key_distribution '" + val + "'");
          std::string pct = val.substr(10);
          if (!pct.empty() && pct.back() == ')') pct.pop_back();
          cfg.local_pct = parse_u32(key, pct);
        }
      } else {
        throw ConfigError("unknown key_distribution '" + val + "'");
      }
    } else if (key == "protocol") {
      auto p = parse_protocol(val);
      if (!p) throw ConfigError("unknown protocol '" + val + "'");
      cfg.protocol = *p;
    } else if (key == "baseline_ro_validation") cfg.baseline_ro_validation = parse_bool(key, val);
    else if (key == "latency") cfg.latency = LatencyModel::parse(val);
    else if (key == "drop_rate") {
      try {
        cfg.drop_rate = std::stod(val);
      } catch (const std::exception&) {
        throw ConfigError("bad drop_rate '" + val + "'");
      }
    } else if (key == "trace_messages") cfg.trace_messages = parse_bool(key, val);
    else if (key == "lock_timeout") cfg.node.lock_timeout = time();
    else if (key == "starvation_threshold") cfg.node.starvation_threshold = time();
    else if (key == "backoff_initial") cfg.node.backoff_initial = time();
    else if (key == "backoff_cap") cfg.node.backoff_cap = time();
    else if (key == "backoff_max_attempts") cfg.node.backoff_max_attempts = parse_u32(key, val);
    else if (key == "version_history") cfg.node.version_history = parse_uint(key, val);
    else if (key == "retry_backoff_min") cfg.retry_backoff_min = time();
    else if (key == "retry_backoff_max") cfg.retry_backoff_max = time();
    else if (key.rfind("placement.", 0) == 0) {
      Key k = parse_u32(key, key.substr(10));
      std::vector<NodeId> nodes;
      std::istringstream list(val);
      std::string item;
      while (std::getline(list, item, ',')) nodes.push_back(parse_u32(key, trim(item)));
      cfg.placements[k] = std::move(nodes);
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown setting '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

WorkloadConfig load_workload_config(const std::string& path, WorkloadConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_workload_config(ss.str(), std::move(base));
}

// --------------------------------------------------------------- generator

TxnScript generate_txn(const WorkloadConfig& cfg, const PartitionMap& pmap, NodeId home,
                       std::mt19937_64& rng) {
  TxnScript s;
  s.is_update = std::uniform_int_distribution<std::uint32_t>(0, 99)(rng) >= cfg.read_only_pct;
  const std::size_t n = s.is_update ? 2 : cfg.ro_txn_len;

  const auto& local = pmap.keys_on(home);
  std::uniform_int_distribution<Key> any(0, cfg.num_keys - 1);
  auto draw = [&]() -> Key {
    if (cfg.key_distribution == KeyDistribution::kUniform || local.empty()) return any(rng);
    bool want_local = std::uniform_int_distribution<std::uint32_t>(0, 99)(rng) < cfg.local_pct;
    if (want_local) return local[std::uniform_int_distribution<std::size_t>(0, local.size() - 1)(rng)];
    if (local.size() == cfg.num_keys) return any(rng);
    for (;;) {
      Key k = any(rng);
      if (!pmap.is_replica(k, home)) return k;
    }
  };
  std::set<Key> used;
  while (s.keys.size() < n) {
    Key k = draw();
    // tiny local key sets cannot always supply enough distinct keys
    if (used.size() >= local.size() && cfg.key_distribution == KeyDistribution::kLocalMix) k = any(rng);
    if (used.insert(k).second) s.keys.push_back(k);
  }
  return s;
}

// ------------------------------------------------------------------ driver

namespace {

class Driver {
 public:
  Driver(const WorkloadConfig& cfg, Cluster& cluster)
      : cfg_(cfg), cluster_(cluster), rng_(cfg.seed * 0x9e3779b97f4a7c15ULL + 17) {}

  void start() {
    for (NodeId n = 0; n < cluster_.size(); ++n) {
      for (std::uint32_t c = 0; c < cfg_.clients_per_node; ++c) {
        clients_.push_back(Client{n, {}, {}, 0});
      }
    }
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      cluster_.sim().schedule(clients_[i].home, 0, [this, i] { next_script(i); });
    }
  }

 private:
  struct Client {
    NodeId home = 0;
    TxnScript script;
    TxnId txn;
    std::size_t step = 0;
  };

  Coordinator& coord(std::size_t i) { return cluster_.site(clients_[i].home).coordinator(); }

  void next_script(std::size_t i) {
    if (started_ >= cfg_.txn_budget) return;
    ++started_;
    clients_[i].script = generate_txn(cfg_, cluster_.pmap(), clients_[i].home, rng_);
    attempt(i);
  }

  void attempt(std::size_t i) {
    Client& c = clients_[i];
    c.txn = coord(i).begin(c.script.is_update);
    c.step = 0;
    step(i);
  }

  void step(std::size_t i) {
    Client& c = clients_[i];
    if (c.step == c.script.keys.size()) {
      coord(i).commit(c.txn, [this, i](bool ok) {
        if (ok) {
          next_script(i);
        } else {
          retry(i);
        }
      });
      return;
    }
    Key k = c.script.keys[c.step];
    coord(i).read(c.txn, k, [this, i, k](std::optional<Value> v) {
      if (!v) {
        retry(i);
        return;
      }
      Client& cl = clients_[i];
      if (cl.script.is_update) coord(i).write(cl.txn, k, cl.txn.to_string() + "/" + std::to_string(k));
      ++cl.step;
      step(i);
    });
  }

  void retry(std::size_t i) {
    Time d = std::uniform_int_distribution<Time>(cfg_.retry_backoff_min, cfg_.retry_backoff_max)(rng_);
    cluster_.sim().schedule(clients_[i].home, d, [this, i] { attempt(i); });
  }

  const WorkloadConfig& cfg_;
  Cluster& cluster_;
  std::mt19937_64 rng_;
  std::vector<Client> clients_;
  std::uint64_t started_ = 0;
};

LatencySummary summarize(std::vector<Time> xs) {
  LatencySummary s;
  if (xs.empty()) return s;
  std::sort(xs.begin(), xs.end());
  s.count = xs.size();
  s.mean = static_cast<double>(std::accumulate(xs.begin(), xs.end(), Time{0})) / static_cast<double>(xs.size());
  auto rank = [&](double p) {
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs.size()))) ;
    return xs[std::min(xs.size() - 1, idx == 0 ? 0 : idx - 1)];
  };
  s.p50 = rank(0.50);
  s.p90 = rank(0.90);
  s.p99 = rank(0.99);
  s.max = xs.back();
  return s;
}

nlohmann::json latency_json(const LatencySummary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"p50", s.p50},
          {"p90", s.p90},     {"p99", s.p99},   {"max", s.max}};
}

}  // namespace

bool MetricsReport::ok() const {
  return quiescent && !livelock && invariant_violations.empty() && (!check || check->consistent);
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["seed"] = seed;
  j["committed"] = {{"update", committed_update}, {"read_only", committed_read_only}};
  j["aborted"] = {{"update", aborted_update}, {"read_only", aborted_read_only}};
  j["time_unit_ticks"] = kUnit;
  j["end_time"] = end_time;
  j["throughput_per_unit"] = throughput;
  j["latency"] = {{"update", latency_json(update_latency)},
                  {"read_only", latency_json(read_only_latency)}};
  j["commit_breakdown"] = {{"mean_internal_to_external", mean_internal_to_external},
                           {"mean_snapshot_queue_wait", mean_queue_wait},
                           {"snapshot_queue_wait_fraction", queue_wait_fraction}};
  j["events"] = events;
  j["messages"] = messages;
  j["trace_digest"] = trace_digest;
  j["quiescent"] = quiescent;
  j["livelock"] = livelock;
  if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
  j["invariant_violations"] = invariant_violations;
  if (check) j["check"] = nlohmann::json::parse(check->to_json());
  return j.dump(2);
}

BenchResult run_benchmark(const WorkloadConfig& cfg, bool run_checker,
                          const std::function<void(Cluster&)>& instrument) {
  cfg.validate();
  Cluster cluster(cfg.cluster_config());
  if (instrument) instrument(cluster);
  BenchResult out;
  for (NodeId n = 0; n < cluster.size(); ++n) {
    cluster.site(n).coordinator().set_outcome_listener(
        [&out](const TxnOutcome& o) { out.outcomes.push_back(o); });
  }
  Driver driver(cfg, cluster);
  driver.start();
  RunReport run = cluster.sim().run();

  MetricsReport& m = out.report;
  m.protocol = to_string(cfg.protocol);
  m.seed = cfg.seed;
  m.events = run.events;
  m.messages = cluster.sim().messages_sent();
  m.livelock = run.livelock;
  m.diagnostic = run.diagnostic;
  m.quiescent = run.quiescent && cluster.quiescent_clean();
  m.invariant_violations = cluster.check_invariants();

  std::vector<Time> upd, ro;
  double span_sum = 0, wait_sum = 0, upd_latency_sum = 0;
  for (const auto& o : out.outcomes) {
    m.end_time = std::max(m.end_time, o.end);
    if (!o.committed) {
      ++(o.is_update ? m.aborted_update : m.aborted_read_only);
      continue;
    }
    const Time lat = o.end - o.begin;
    if (o.is_update) {
      ++m.committed_update;
      upd.push_back(lat);
      span_sum += static_cast<double>(o.end - o.internal_commit);
      wait_sum += static_cast<double>(o.queue_wait);
      upd_latency_sum += static_cast<double>(lat);
    } else {
      ++m.committed_read_only;
      ro.push_back(lat);
    }
  }
  const auto committed = m.committed_update + m.committed_read_only;
  if (m.end_time > 0) {
    m.throughput = static_cast<double>(committed) / (static_cast<double>(m.end_time) / kUnit);
  }
  m.update_latency = summarize(upd);
  m.read_only_latency = summarize(ro);
  if (m.committed_update > 0) {
    m.mean_internal_to_external = span_sum / static_cast<double>(m.committed_update);
    m.mean_queue_wait = wait_sum / static_cast<double>(m.committed_update);
  }
  if (upd_latency_sum > 0) m.queue_wait_fraction = wait_sum / upd_latency_sum;
  m.trace_digest = hex_digest(cluster.sim().trace().digest());
  if (run_checker) m.check = check_trace(cluster.sim().trace());
  out.trace = cluster.sim().trace();
  return out;
}

std::string outcomes_csv(const std::vector<TxnOutcome>& outcomes) {
  std::ostringstream s;
  s << "txn,type,committed,begin,end,latency,internal_commit,queue_wait\n";
  for (const auto& o : outcomes) {
    s << o.id.to_string() << ',' << (o.is_update ? "update" : "read_only") << ','
      << (o.committed ? 1 : 0) << ',' << o.begin << ',' << o.end << ',' << (o.end - o.begin) << ','
      << o.internal_commit << ',' << o.queue_wait << '\n';
  }
  return s.str();
}

}  // namespace sss
