#include "sss/core_types.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "json.hpp"

namespace sss {

using nlohmann::json;

void VectorClock::join_with(const VectorClock& other) {
  if (other.size() != size()) {
    throw ConfigError("vector clock size mismatch: " + std::to_string(size()) + " vs " +
                      std::to_string(other.size()));
  }
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    entries_[k] = std::max(entries_[k], other.entries_[k]);
  }
}

std::string VectorClock::to_string() const {
  std::string out = "[";
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(entries_[k]);
  }
  return out + "]";
}

VectorClock vc_join(const VectorClock& a, const VectorClock& b) {
  VectorClock out = a;
  out.join_with(b);
  return out;
}

bool vc_leq(const VectorClock& a, const VectorClock& b) {
  if (a.size() != b.size()) {
    throw ConfigError("vector clock size mismatch: " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] > b[k]) return false;
  }
  return true;
}

std::string TxnId::to_string() const {
  return std::to_string(origin) + "." + std::to_string(seq);
}

TxnId TxnId::parse(const std::string& s) {
  auto dot = s.find('.');
  if (dot == std::string::npos) throw std::invalid_argument("bad txn id: " + s);
  TxnId id;
  id.origin = static_cast<NodeId>(std::stoul(s.substr(0, dot)));
  id.seq = std::stoull(s.substr(dot + 1));
  return id;
}

bool queue_order_less(const SnapshotQueueEntry& a, const SnapshotQueueEntry& b) {
  if (a.insertion_snapshot != b.insertion_snapshot) {
    return a.insertion_snapshot < b.insertion_snapshot;
  }
  if (a.kind != b.kind) return a.kind == EntryKind::kRead;
  return a.txn < b.txn;
}

const char* to_string(TxnStatus s) {
  switch (s) {
    case TxnStatus::kActive: return "active";
    case TxnStatus::kPreparing: return "preparing";
    case TxnStatus::kInternallyCommitted: return "internally_committed";
    case TxnStatus::kPreCommit: return "pre_commit";
    case TxnStatus::kExternallyCommitted: return "externally_committed";
    case TxnStatus::kAborted: return "aborted";
  }
  return "?";
}

const Value* TxnDescriptor::buffered_write(Key k) const {
  for (const auto& w : write_set) {
    if (w.key == k) return &w.value;
  }
  return nullptr;
}

void TxnDescriptor::buffer_write(Key k, Value v) {
  for (auto& w : write_set) {
    if (w.key == k) {
      w.value = std::move(v);
      return;
    }
  }
  write_set.push_back({k, std::move(v)});
}

void TxnDescriptor::advance(TxnStatus next) {
  auto rank = [](TxnStatus s) { return static_cast<int>(s); };
  bool ok = false;
  if (next == TxnStatus::kAborted) {
    ok = is_update && (status == TxnStatus::kActive || status == TxnStatus::kPreparing);
  } else if (status != TxnStatus::kAborted) {
    ok = rank(next) > rank(status);
  }
  if (!ok) {
    throw std::logic_error(std::string("illegal txn transition ") + to_string(status) + " -> " +
                           to_string(next) + " for " + id.to_string());
  }
  status = next;
}

const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::kReadRequest: return "ReadRequest";
    case MessageKind::kReadReturn: return "ReadReturn";
    case MessageKind::kPrepare: return "Prepare";
    case MessageKind::kVote: return "Vote";
    case MessageKind::kDecide: return "Decide";
    case MessageKind::kAck: return "Ack";
    case MessageKind::kRemove: return "Remove";
    case MessageKind::kRelease: return "Release";
    case MessageKind::kHoldRequest: return "HoldRequest";
    case MessageKind::kHoldReply: return "HoldReply";
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(const std::string& s) {
  static constexpr std::array kAll = {MessageKind::kReadRequest, MessageKind::kReadReturn,
                                      MessageKind::kPrepare,     MessageKind::kVote,
                                      MessageKind::kDecide,      MessageKind::kAck,
                                      MessageKind::kRemove,      MessageKind::kRelease,
                                      MessageKind::kHoldRequest, MessageKind::kHoldReply};
  for (auto k : kAll) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

int priority_class(MessageKind k) {
  switch (k) {
    // hold traffic shares Remove's class so a forwarded Remove never overtakes
    // the hold request it cancels on the same link
    case MessageKind::kRemove:
    case MessageKind::kHoldRequest:
    case MessageKind::kHoldReply: return 0;
    case MessageKind::kDecide:
    case MessageKind::kAck:
    case MessageKind::kRelease: return 1;
    case MessageKind::kPrepare:
    case MessageKind::kVote: return 2;
    case MessageKind::kReadRequest:
    case MessageKind::kReadReturn: return 3;
  }
  return 3;
}

std::string to_hex(const std::string& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out += kDigits[c >> 4];
    out += kDigits[c & 0xf];
  }
  return out;
}

std::string from_hex(const std::string& hex) {
  if (hex.size() % 2) throw std::invalid_argument("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  std::string out(hex.size() / 2, '\0');
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<char>(nibble(hex[2 * k]) << 4 | nibble(hex[2 * k + 1]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace {

json vc_json(const VectorClock& vc) { return vc.entries(); }
VectorClock vc_from(const json& j) { return VectorClock(j.get<std::vector<std::uint64_t>>()); }

json entries_json(const std::vector<SnapshotQueueEntry>& es) {
  json arr = json::array();
  for (const auto& e : es) {
    arr.push_back({e.txn.to_string(), e.insertion_snapshot, e.kind == EntryKind::kRead ? "R" : "W"});
  }
  return arr;
}

std::vector<SnapshotQueueEntry> entries_from(const json& j) {
  std::vector<SnapshotQueueEntry> out;
  for (const auto& e : j) {
    out.push_back({TxnId::parse(e[0].get<std::string>()), e[1].get<std::uint64_t>(),
                   e[2].get<std::string>() == "R" ? EntryKind::kRead : EntryKind::kWrite});
  }
  return out;
}

json ids_json(const std::vector<TxnId>& ids) {
  json a = json::array();
  for (const auto& t : ids) a.push_back(t.to_string());
  return a;
}

std::vector<TxnId> ids_from(const json& j) {
  std::vector<TxnId> out;
  for (const auto& e : j) out.push_back(TxnId::parse(e.get<std::string>()));
  return out;
}

struct PayloadToJson {
  json& j;
  void operator()(const ReadRequest& p) const {
    j["key"] = p.key;
    j["vc"] = vc_json(p.vc);
    j["has_read"] = p.has_read;
    j["is_update"] = p.is_update;
    j["read_seq"] = p.read_seq;
    j["held"] = ids_json(p.held);
  }
  void operator()(const ReadReturn& p) const {
    j["key"] = p.key;
    j["read_seq"] = p.read_seq;
    j["value"] = to_hex(p.value);
    j["writer"] = p.writer.to_string();
    j["version_vc"] = vc_json(p.version_vc);
    j["counter"] = p.counter;
    j["max_vc"] = vc_json(p.max_vc);
    j["propagated"] = entries_json(p.propagated);
    j["held"] = ids_json(p.held);
  }
  void operator()(const Prepare& p) const {
    j["vc"] = vc_json(p.vc);
    json rs = json::array();
    for (const auto& r : p.read_set) {
      rs.push_back({r.key, r.writer.to_string(), vc_json(r.version_vc), r.counter});
    }
    j["read_set"] = rs;
    json ws = json::array();
    for (const auto& w : p.write_set) ws.push_back({w.key, to_hex(w.value)});
    j["write_set"] = ws;
    j["propagated"] = entries_json(p.propagated);
    j["is_update"] = p.is_update;
  }
  void operator()(const Vote& p) const {
    j["prep_vc"] = vc_json(p.prep_vc);
    j["ok"] = p.ok;
  }
  void operator()(const Decide& p) const {
    j["commit_vc"] = vc_json(p.commit_vc);
    j["commit"] = p.commit;
  }
  void operator()(const Ack& p) const {
    j["snapshot"] = p.snapshot;
    j["installed_at"] = p.installed_at;
    j["queue_wait"] = p.queue_wait;
  }
  void operator()(const Remove&) const {}
  void operator()(const Release& p) const { j["commit_vc"] = vc_json(p.commit_vc); }
  void operator()(const HoldRequest& p) const { j["reader"] = p.reader.to_string(); }
  void operator()(const HoldReply& p) const {
    j["reader"] = p.reader.to_string();
    j["granted"] = p.granted;
  }
};

}  // namespace

std::string encode_message(const Message& m) {
  json j;
  j["kind"] = to_string(m.kind());
  j["from"] = m.from;
  j["to"] = m.to;
  j["txn"] = m.txn.to_string();
  std::visit(PayloadToJson{j}, m.payload);
  return j.dump();
}

Message decode_message(const std::string& text) {
  json j = json::parse(text);
  Message m;
  m.from = j.at("from").get<NodeId>();
  m.to = j.at("to").get<NodeId>();
  m.txn = TxnId::parse(j.at("txn").get<std::string>());
  auto kind = parse_message_kind(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown message kind in: " + text);
  switch (*kind) {
    case MessageKind::kReadRequest: {
      ReadRequest p;
      p.key = j.at("key").get<Key>();
      p.vc = vc_from(j.at("vc"));
      p.has_read = j.at("has_read").get<std::vector<bool>>();
      p.is_update = j.at("is_update").get<bool>();
      p.read_seq = j.at("read_seq").get<std::uint32_t>();
      p.held = ids_from(j.at("held"));
      m.payload = std::move(p);
      break;
    }
    case MessageKind::kReadReturn: {
      ReadReturn p;
      p.key = j.at("key").get<Key>();
      p.read_seq = j.at("read_seq").get<std::uint32_t>();
      p.value = from_hex(j.at("value").get<std::string>());
      p.writer = TxnId::parse(j.at("writer").get<std::string>());
      p.version_vc = vc_from(j.at("version_vc"));
      p.counter = j.at("counter").get<std::uint64_t>();
      p.max_vc = vc_from(j.at("max_vc"));
      p.propagated = entries_from(j.at("propagated"));
      p.held = ids_from(j.at("held"));
      m.payload = std::move(p);
      break;
    }
    case MessageKind::kPrepare: {
      Prepare p;
      p.vc = vc_from(j.at("vc"));
      for (const auto& r : j.at("read_set")) {
        p.read_set.push_back({r[0].get<Key>(), TxnId::parse(r[1].get<std::string>()), vc_from(r[2]),
                              r[3].get<std::uint64_t>()});
      }
      for (const auto& w : j.at("write_set")) {
        p.write_set.push_back({w[0].get<Key>(), from_hex(w[1].get<std::string>())});
      }
      p.propagated = entries_from(j.at("propagated"));
      p.is_update = j.at("is_update").get<bool>();
      m.payload = std::move(p);
      break;
    }
    case MessageKind::kVote:
      m.payload = Vote{vc_from(j.at("prep_vc")), j.at("ok").get<bool>()};
      break;
    case MessageKind::kDecide:
      m.payload = Decide{vc_from(j.at("commit_vc")), j.at("commit").get<bool>()};
      break;
    case MessageKind::kAck:
      m.payload = Ack{j.at("snapshot").get<std::uint64_t>(), j.at("installed_at").get<Time>(),
                      j.at("queue_wait").get<Time>()};
      break;
    case MessageKind::kRemove:
      m.payload = Remove{};
      break;
    case MessageKind::kRelease:
      m.payload = Release{vc_from(j.at("commit_vc"))};
      break;
    case MessageKind::kHoldRequest:
      m.payload = HoldRequest{TxnId::parse(j.at("reader").get<std::string>())};
      break;
    case MessageKind::kHoldReply:
      m.payload = HoldReply{TxnId::parse(j.at("reader").get<std::string>()),
                            j.at("granted").get<bool>()};
      break;
  }
  return m;
}

}  // namespace sss
