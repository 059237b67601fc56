// Command-line front end: run a benchmark, check a recorded trace, or replay
// one of the directed scenarios.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sss/scenarios.hpp"
#include "sss/workload.hpp"

namespace {

int run_bench(const std::string& config_path, const CLI::App& cmd, std::uint64_t seed,
              const std::string& protocol, const std::string& latency, double drop_rate,
              const std::string& out_path, const std::string& trace_path,
              const std::string& csv_path, bool no_check) {
  sss::WorkloadConfig cfg = sss::load_workload_config(config_path);
  if (cmd.count("--seed") > 0) cfg.seed = seed;
  if (cmd.count("--protocol") > 0) {
    auto p = sss::parse_protocol(protocol);
    if (!p) throw sss::ConfigError("unknown protocol '" + protocol + "'");
    cfg.protocol = *p;
  }
  if (cmd.count("--latency") > 0) cfg.latency = sss::LatencyModel::parse(latency);
  if (cmd.count("--drop-rate") > 0) cfg.drop_rate = drop_rate;
  cfg.validate();

  sss::BenchResult res = sss::run_benchmark(cfg, !no_check);
  const std::string report = res.report.to_json();
  if (out_path.empty()) {
    std::cout << report << "\n";
  } else {
    std::ofstream(out_path) << report << "\n";
  }
  if (!trace_path.empty()) {
    std::ofstream t(trace_path);
    res.trace.write_ndjson(t);
  }
  if (!csv_path.empty()) std::ofstream(csv_path) << sss::outcomes_csv(res.outcomes);

  const auto& m = res.report;
  std::cerr << m.protocol << " seed=" << m.seed << " committed=" << m.committed_update + m.committed_read_only
            << " ro_aborts=" << m.aborted_read_only << " throughput=" << m.throughput
            << " digest=" << m.trace_digest;
  if (m.check) std::cerr << " consistent=" << (m.check->consistent ? "yes" : "no");
  std::cerr << "\n";
  return m.ok() ? 0 : 1;
}

int run_check(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  sss::Trace trace = sss::Trace::read_ndjson(in);
  sss::CheckReport report = sss::check_trace(trace);
  std::cout << report.to_json() << "\n";
  if (!report.consistent) {
    std::cerr << "violation";
    if (!report.error.empty()) std::cerr << ": " << report.error;
    std::cerr << "\n";
    for (const auto& e : report.cycle) std::cerr << "  " << e.to_string() << "\n";
  }
  return report.consistent ? 0 : 1;
}

int run_scenario(const std::string& name, bool show) {
  sss::ScenarioResult r = sss::run_scenario(name);
  if (show) {
    for (const auto& line : r.transcript) std::cout << line << "\n";
  }
  const std::string diff = r.diff();
  std::cout << name << ": trace " << (diff.empty() ? "matches expected" : "differs, " + diff) << "\n";
  for (const auto& c : r.checks) {
    std::cout << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name;
    if (!c.pass && !c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
  }
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Snapshot-queue transactional KV store simulator"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "Run a closed-loop workload and report metrics");
  std::string config_path, protocol, latency, out_path, trace_path, csv_path;
  std::uint64_t seed = 1;
  double drop_rate = 0;
  bool no_check = false;
  bench->add_option("--config", config_path, "Workload config file")->required()->check(CLI::ExistingFile);
  bench->add_option("--seed", seed, "Override the config seed");
  bench->add_option("--protocol", protocol, "sss or 2pc-baseline");
  bench->add_option("--latency", latency, "fixed:T, uniform:LO:HI or lognormal:MU:SIGMA (ticks)");
  bench->add_option("--drop-rate", drop_rate, "Probability a message is dropped")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--out", out_path, "Write the JSON report here instead of stdout");
  bench->add_option("--trace", trace_path, "Write the NDJSON event trace");
  bench->add_option("--csv", csv_path, "Write per-transaction latency samples as CSV");
  bench->add_flag("--no-check", no_check, "Skip the consistency checker");

  auto* check = app.add_subcommand("check", "Check an NDJSON trace for consistency violations");
  std::string check_path;
  check->add_option("trace", check_path, "Trace file")->required()->check(CLI::ExistingFile);

  auto* scenario = app.add_subcommand("scenario", "Replay a directed example and diff its trace");
  std::string scenario_name;
  bool show = false;
  scenario->add_option("name", scenario_name, "fig3, fig4 or transitive")
      ->required()
      ->check(CLI::IsMember(sss::scenario_names()));
  scenario->add_flag("--show", show, "Print the full transcript");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      return run_bench(config_path, *bench, seed, protocol, latency, drop_rate, out_path, trace_path,
                       csv_path, no_check);
    }
    if (*check) return run_check(check_path);
    if (*scenario) return run_scenario(scenario_name, show);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
