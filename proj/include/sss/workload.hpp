#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sss/checker.hpp"
#include "sss/cluster.hpp"

namespace sss {

enum class KeyDistribution { kUniform, kLocalMix };

struct WorkloadConfig {
  std::uint32_t num_nodes = 4;
  std::uint32_t num_keys = 200;
  std::uint32_t replication_degree = 2;
  std::uint32_t read_only_pct = 50;
  std::uint32_t ro_txn_len = 2;
  std::uint32_t clients_per_node = 10;
  KeyDistribution key_distribution = KeyDistribution::kUniform;
  std::uint32_t local_pct = 50;
  std::uint64_t txn_budget = 1000;  // committed transactions before clients stop
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> placement_seed;  // defaults to `seed`
  Protocol protocol = Protocol::kSss;
  bool baseline_ro_validation = true;
  LatencyModel latency;
  double drop_rate = 0.0;
  bool trace_messages = true;
  Time retry_backoff_min = 1 * kUnit;
  Time retry_backoff_max = 10 * kUnit;
  NodeOptions node;
  std::map<Key, std::vector<NodeId>> placements;

  /// Throws ConfigError on out-of-range settings.
  void validate() const;
  ClusterConfig cluster_config() const;
};

/// Parses flat `key = value` text; `#` starts a comment. Explicit
/// placements use `placement.<key> = n1,n2`.
WorkloadConfig parse_workload_config(const std::string& text, WorkloadConfig base = {});
WorkloadConfig load_workload_config(const std::string& path, WorkloadConfig base = {});

struct TxnScript {
  bool is_update = false;
  std::vector<Key> keys;  // update: read then write each; read-only: read each
};

/// Draws one transaction for a client homed at `home`. Keys within a script
/// are distinct. Under local_mix, a pick is local (stored on `home`) with
/// probability local_pct and otherwise drawn from keys not stored there.
TxnScript generate_txn(const WorkloadConfig& cfg, const PartitionMap& pmap, NodeId home,
                       std::mt19937_64& rng);

struct LatencySummary {
  std::uint64_t count = 0;
  double mean = 0;
  Time p50 = 0;
  Time p90 = 0;
  Time p99 = 0;
  Time max = 0;
};

struct MetricsReport {
  std::string protocol;
  std::uint64_t seed = 0;
  std::uint64_t committed_update = 0;
  std::uint64_t committed_read_only = 0;
  std::uint64_t aborted_update = 0;
  std::uint64_t aborted_read_only = 0;
  Time end_time = 0;
  double throughput = 0;  // committed transactions per simulated time unit
  LatencySummary update_latency;
  LatencySummary read_only_latency;
  /// Update transactions: mean time between last install and client reply.
  double mean_internal_to_external = 0;
  /// Update transactions: mean time a W entry stayed in a snapshot-queue.
  double mean_queue_wait = 0;
  /// Summed snapshot-queue wait over summed update latency.
  double queue_wait_fraction = 0;
  std::uint64_t events = 0;
  std::uint64_t messages = 0;
  std::string trace_digest;
  bool quiescent = false;
  bool livelock = false;
  std::string diagnostic;
  std::vector<std::string> invariant_violations;
  std::optional<CheckReport> check;

  bool ok() const;
  std::string to_json() const;
};

struct BenchResult {
  MetricsReport report;
  std::vector<TxnOutcome> outcomes;
  Trace trace;
};

/// `instrument` sees the cluster before the first event, e.g. to attach
/// read observers.
BenchResult run_benchmark(const WorkloadConfig& cfg, bool run_checker = true,
                          const std::function<void(Cluster&)>& instrument = {});

/// CSV with one row per transaction attempt.
std::string outcomes_csv(const std::vector<TxnOutcome>& outcomes);

}  // namespace sss
