#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sss/core_types.hpp"

namespace sss {

enum class TraceKind : std::uint8_t {
  // message fabric
  kSend,
  kDeliver,
  kDrop,
  // history (consumed by the checker)
  kBegin,
  kRead,
  kInstall,
  kReply,
  kAbort,
  // node state transitions
  kLock,
  kLockTimeout,
  kEnqueue,
  kDequeue,
  kVote,
  kDecide,
  kAckSent,
  kRemoveApplied,
  kRemoveForward,
  kReadDeferred,
  kReadBackoff,
  kHold,
  kRelease,
};

const char* to_string(TraceKind k);
std::optional<TraceKind> parse_trace_kind(const std::string& s);

/// One structured trace record. Field use per kind:
///   kBegin:   num = 1 for update txns
///   kRead:    node = responder, key, other = writer of the returned version
///   kInstall: node, key, other = writer (== txn), vc = commit clock
///   kReply:   node = coordinator, num = 1 committed
///   kEnqueue/kDequeue: key, num = insertion snapshot, detail = "R" or "W"
///   kHold:    txn = reader, other = writer, detail = "local", "granted" or "refused"
///   kRelease: txn = writer; at its coordinator num = 1, at other nodes num = 0
///   kSend/kDeliver: node = sender/receiver, other.origin = peer, detail = message kind
struct TraceRecord {
  Time time = 0;
  TraceKind kind = TraceKind::kSend;
  NodeId node = 0;
  TxnId txn;
  std::optional<Key> key;
  std::optional<TxnId> other;
  VectorClock vc;
  std::int64_t num = 0;
  std::string detail;

  bool operator==(const TraceRecord&) const = default;
};

class Trace {
 public:
  void add(TraceRecord r) { records_.push_back(std::move(r)); }
  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  /// FNV-1a over the NDJSON rendering; identical traces give identical digests.
  std::uint64_t digest() const;

  void write_ndjson(std::ostream& out) const;
  static Trace read_ndjson(std::istream& in);

 private:
  std::vector<TraceRecord> records_;
};

std::string to_ndjson_line(const TraceRecord& r);
TraceRecord from_ndjson_line(const std::string& line);

std::string hex_digest(std::uint64_t d);

}  // namespace sss
