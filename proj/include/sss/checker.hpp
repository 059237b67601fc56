#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sss/core_types.hpp"
#include "sss/trace.hpp"

namespace sss {

/// Raised for malformed or incomplete histories, e.g. a read naming a
/// version that was never installed by a committed transaction.
class CheckerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObservedRead {
  Key key = 0;
  TxnId writer;
  NodeId responder = 0;
};

struct TxnHistory {
  TxnId id;
  bool is_update = false;
  bool committed = false;
  bool aborted = false;
  Time begin = 0;
  Time reply = 0;
  std::vector<ObservedRead> reads;
  std::vector<Key> writes;
};

/// Committed transactions of one run plus the per-key install order.
struct History {
  std::vector<TxnHistory> txns;                // committed only, sorted by id
  std::map<Key, std::vector<TxnId>> installs;  // agreed install order per key

  static History from_trace(const Trace& trace);
  static History from_records(const std::vector<TraceRecord>& records);

  /// Keeps every update transaction and the read-only ones accepted by `keep`.
  History project(const std::function<bool(const TxnHistory&)>& keep) const;
  const TxnHistory* find(const TxnId& id) const;
  std::size_t update_count() const;
};

enum class EdgeType : std::uint8_t { kWr, kWw, kRw, kExt };
const char* to_string(EdgeType t);

/// How external-commit order edges are derived from timestamps.
enum class ExtOrder : std::uint8_t {
  /// Ti -> Tj when Ti replied strictly before Tj began.
  kRealTime,
  /// Ti -> Tj when Ti replied strictly before Tj replied.
  kReplyOrder,
};

struct Edge {
  TxnId from;
  TxnId to;
  EdgeType type = EdgeType::kWr;
  std::optional<Key> key;

  std::string to_string() const;
  bool operator==(const Edge&) const = default;
};

/// Direct serialization graph. Conflict edges are stored explicitly; ext edges
/// are kept implicit (sorted timestamps) so the graph stays linear in size.
class Dsg {
 public:
  Dsg(const History& h, ExtOrder ext);

  std::size_t size() const { return txns_.size(); }
  const std::vector<Edge>& conflict_edges() const { return conflict_; }
  std::map<EdgeType, std::uint64_t> edge_counts() const;
  bool has_edge(const TxnId& from, const TxnId& to, EdgeType t) const;

  /// Concrete cycle as a list of typed edges, or nullopt when acyclic.
  std::optional<std::vector<Edge>> find_cycle() const;
  /// Some serial order respecting every edge; nullopt when cyclic.
  std::optional<std::vector<TxnId>> topological_order() const;

 private:
  struct Arc {
    std::uint32_t to = 0;
    EdgeType type = EdgeType::kWr;
    std::optional<Key> key;
  };
  std::vector<std::vector<Arc>> adjacency() const;

  ExtOrder ext_;
  std::vector<TxnHistory> txns_;
  std::map<TxnId, std::uint32_t> index_;
  std::vector<Edge> conflict_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> conflict_idx_;
};

Dsg build_dsg(const History& h, ExtOrder ext = ExtOrder::kRealTime);
std::optional<std::vector<Edge>> detect_cycle(const Dsg& g);

/// Exhaustive search for a serial order consistent with the external order in
/// which every read sees the latest prior write and writes follow the install
/// order. Refuses histories with more than `limit` transactions.
std::optional<std::vector<TxnId>> brute_force_external_order(const History& h,
                                                             ExtOrder ext = ExtOrder::kRealTime,
                                                             std::size_t limit = 8);

struct CheckReport {
  bool consistent = false;
  std::size_t txns = 0;
  std::map<EdgeType, std::uint64_t> edges;
  std::vector<Edge> cycle;
  std::string error;

  std::string to_json() const;
};

/// Full pipeline: history reconstruction, graph, cycle search.
CheckReport check_trace(const Trace& trace, ExtOrder ext = ExtOrder::kRealTime);

}  // namespace sss
