#pragma once

#include <cstdint>
#include <compare>
#include <functional>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sss {

using NodeId = std::uint32_t;
using Key = std::uint32_t;
using Value = std::string;
/// Simulated time in ticks. One configuration "unit" is kUnit ticks.
using Time = std::int64_t;

inline constexpr Time kUnit = 1000;

/// Thrown for mismatched clock sizes and other misconfigured clusters.
class ConfigError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fixed-width logical clock, one entry per node.
class VectorClock {
 public:
  VectorClock() = default;
  explicit VectorClock(std::size_t n) : entries_(n, 0) {}
  VectorClock(std::initializer_list<std::uint64_t> init) : entries_(init) {}
  explicit VectorClock(std::vector<std::uint64_t> entries) : entries_(std::move(entries)) {}

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::uint64_t operator[](std::size_t i) const { return entries_.at(i); }
  std::uint64_t& operator[](std::size_t i) { return entries_.at(i); }

  const std::vector<std::uint64_t>& entries() const { return entries_; }

  /// Entrywise max in place.
  void join_with(const VectorClock& other);

  bool operator==(const VectorClock&) const = default;

  std::string to_string() const;

 private:
  std::vector<std::uint64_t> entries_;
};

VectorClock vc_join(const VectorClock& a, const VectorClock& b);
bool vc_leq(const VectorClock& a, const VectorClock& b);

/// Transaction identity: (origin node, per-node counter). Sequence 0 is
/// reserved for the pseudo-transaction that wrote a key's initial version.
struct TxnId {
  NodeId origin = 0;
  std::uint64_t seq = 0;

  bool is_initial() const { return seq == 0; }
  auto operator<=>(const TxnId&) const = default;
  std::string to_string() const;
  static TxnId parse(const std::string& s);
};

inline constexpr TxnId kInitialWriter{0, 0};

struct TxnIdHash {
  std::size_t operator()(const TxnId& id) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{id.origin} << 48) ^ id.seq);
  }
};

enum class EntryKind : std::uint8_t { kRead, kWrite };

struct SnapshotQueueEntry {
  TxnId txn;
  std::uint64_t insertion_snapshot = 0;
  EntryKind kind = EntryKind::kRead;

  bool operator==(const SnapshotQueueEntry&) const = default;
};

/// Queue order: insertion-snapshot, then R before W, then txn id.
bool queue_order_less(const SnapshotQueueEntry& a, const SnapshotQueueEntry& b);

struct Version {
  Value value;
  VectorClock vc;
  TxnId writer;
  std::uint64_t counter = 0;  // scalar version number, used by the 2PC baseline
};

struct ReadItem {
  Key key = 0;
  TxnId writer;
  VectorClock version_vc;
  std::uint64_t counter = 0;

  bool operator==(const ReadItem&) const = default;
};

struct WriteItem {
  Key key = 0;
  Value value;

  bool operator==(const WriteItem&) const = default;
};

enum class TxnStatus : std::uint8_t {
  kActive,
  kPreparing,
  kInternallyCommitted,
  kPreCommit,
  kExternallyCommitted,
  kAborted,
};

const char* to_string(TxnStatus s);

/// Coordinator-side transaction state.
struct TxnDescriptor {
  TxnId id;
  VectorClock vc;
  std::vector<bool> has_read;
  std::vector<ReadItem> read_set;
  std::vector<WriteItem> write_set;  // unique keys, last write wins
  std::vector<SnapshotQueueEntry> propagated_set;
  bool is_update = false;
  bool vc_assigned = false;  // read-only clocks are assigned on first read
  NodeId coordinator = 0;
  TxnStatus status = TxnStatus::kActive;

  const Value* buffered_write(Key k) const;
  void buffer_write(Key k, Value v);
  /// Legal transitions only; throws std::logic_error otherwise.
  void advance(TxnStatus next);
};

// ---------------------------------------------------------------------------
// Messages

enum class MessageKind : std::uint8_t {
  kReadRequest,
  kReadReturn,
  kPrepare,
  kVote,
  kDecide,
  kAck,
  kRemove,
  kRelease,
  kHoldRequest,
  kHoldReply,
};

const char* to_string(MessageKind k);
std::optional<MessageKind> parse_message_kind(const std::string& s);

/// Priority class per kind; 0 is delivered first among same-instant events.
int priority_class(MessageKind k);

struct ReadRequest {
  Key key = 0;
  VectorClock vc;
  std::vector<bool> has_read;
  bool is_update = false;
  std::uint32_t read_seq = 0;
  /// Read-only: unreleased writers this transaction already holds back; their
  /// versions stay invisible to it.
  std::vector<TxnId> held;
  bool operator==(const ReadRequest&) const = default;
};

struct ReadReturn {
  Key key = 0;
  std::uint32_t read_seq = 0;
  Value value;
  TxnId writer;
  VectorClock version_vc;
  std::uint64_t counter = 0;
  VectorClock max_vc;
  std::vector<SnapshotQueueEntry> propagated;
  /// Read-only: writers this read skipped and now holds back.
  std::vector<TxnId> held;
  bool operator==(const ReadReturn&) const = default;
};

struct Prepare {
  VectorClock vc;
  std::vector<ReadItem> read_set;
  std::vector<WriteItem> write_set;
  std::vector<SnapshotQueueEntry> propagated;
  bool is_update = true;
  bool operator==(const Prepare&) const = default;
};

struct Vote {
  VectorClock prep_vc;
  bool ok = false;
  bool operator==(const Vote&) const = default;
};

struct Decide {
  VectorClock commit_vc;
  bool commit = false;
  bool operator==(const Decide&) const = default;
};

struct Ack {
  std::uint64_t snapshot = 0;
  Time installed_at = 0;
  Time queue_wait = 0;
  bool operator==(const Ack&) const = default;
};

struct Remove {
  bool operator==(const Remove&) const = default;
};

/// Broadcast by an update's coordinator once no reader holds the update back:
/// its versions become readable by read-only transactions.
struct Release {
  VectorClock commit_vc;
  bool operator==(const Release&) const = default;
};

/// Node -> coordinator of the message's txn (a writer): `reader` skipped one of
/// its installed versions and asks to hold its release back.
struct HoldRequest {
  TxnId reader;
  bool operator==(const HoldRequest&) const = default;
};

/// Refused once the writer has started releasing; the version is then readable.
struct HoldReply {
  TxnId reader;
  bool granted = false;
  bool operator==(const HoldReply&) const = default;
};

using Payload = std::variant<ReadRequest, ReadReturn, Prepare, Vote, Decide, Ack, Remove, Release,
                             HoldRequest, HoldReply>;

struct Message {
  NodeId from = 0;
  NodeId to = 0;
  TxnId txn;
  Payload payload;

  MessageKind kind() const { return static_cast<MessageKind>(payload.index()); }
  int priority() const { return priority_class(kind()); }
  bool operator==(const Message&) const = default;
};

/// Lossless text encoding (one JSON object) used in trace files.
std::string encode_message(const Message& m);
Message decode_message(const std::string& text);

/// Hex helpers for opaque values.
std::string to_hex(const std::string& bytes);
std::string from_hex(const std::string& hex);

}  // namespace sss
