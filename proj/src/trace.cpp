#include "sss/trace.hpp"

#include <array>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace sss {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 21> kNames = {
    "send",     "deliver", "drop",           "begin",         "read",         "install",
    "reply",    "abort",   "lock",           "lock_timeout",  "enqueue",      "dequeue",
    "vote",     "decide",  "ack_sent",       "remove",        "remove_forward", "read_deferred",
    "read_backoff", "hold", "release"};

void fnv_mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= '\n';
  h *= 1099511628211ULL;
}

}  // namespace

const char* to_string(TraceKind k) { return kNames.at(static_cast<std::size_t>(k)); }

std::optional<TraceKind> parse_trace_kind(const std::string& s) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (s == kNames[i]) return static_cast<TraceKind>(i);
  }
  return std::nullopt;
}

std::string to_ndjson_line(const TraceRecord& r) {
  json j;
  j["t"] = r.time;
  j["ev"] = to_string(r.kind);
  j["node"] = r.node;
  j["txn"] = r.txn.to_string();
  if (r.key) j["key"] = *r.key;
  if (r.other) j["other"] = r.other->to_string();
  if (!r.vc.empty()) j["vc"] = r.vc.entries();
  if (r.num != 0) j["n"] = r.num;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j.dump();
}

TraceRecord from_ndjson_line(const std::string& line) {
  json j = json::parse(line);
  TraceRecord r;
  r.time = j.at("t").get<Time>();
  auto kind = parse_trace_kind(j.at("ev").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown trace event: " + line);
  r.kind = *kind;
  r.node = j.at("node").get<NodeId>();
  r.txn = TxnId::parse(j.at("txn").get<std::string>());
  if (j.contains("key")) r.key = j["key"].get<Key>();
  if (j.contains("other")) r.other = TxnId::parse(j["other"].get<std::string>());
  if (j.contains("vc")) r.vc = VectorClock(j["vc"].get<std::vector<std::uint64_t>>());
  if (j.contains("n")) r.num = j["n"].get<std::int64_t>();
  if (j.contains("detail")) r.detail = j["detail"].get<std::string>();
  return r;
}

std::uint64_t Trace::digest() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& r : records_) fnv_mix(h, to_ndjson_line(r));
  return h;
}

void Trace::write_ndjson(std::ostream& out) const {
  for (const auto& r : records_) out << to_ndjson_line(r) << '\n';
}

Trace Trace::read_ndjson(std::istream& in) {
  Trace t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.add(from_ndjson_line(line));
  }
  return t;
}

std::string hex_digest(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

}  // namespace sss
