#pragma once

#include <map>
#include <string>
#include <vector>

#include "sss/checker.hpp"
#include "sss/trace.hpp"

namespace sss {

/// One named assertion evaluated over a scenario's trace.
struct ScenarioCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// A directed, hand-scripted execution over a small fixed-latency cluster.
/// `transcript` renders the trace with symbolic names (N1.., T1.., x, y) so it
/// can be compared line by line with the expected schedule.
struct ScenarioResult {
  std::string name;
  Trace trace;
  std::vector<std::string> transcript;
  std::vector<std::string> expected;
  std::vector<ScenarioCheck> checks;
  CheckReport check;
  std::map<std::string, TxnId> txns;

  /// First line where transcript and expected differ, or empty when equal.
  std::string diff() const;
  bool ok() const;
};

std::vector<std::string> scenario_names();
/// Throws std::invalid_argument for an unknown name.
ScenarioResult run_scenario(const std::string& name);

}  // namespace sss
