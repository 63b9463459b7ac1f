#pragma once

// Shared vocabulary for every protocol in the library: values, version tags,
// message kinds, payloads, and their canonical JSON forms used by traces.

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "casim/rational.hpp"

namespace casim {

using Json = nlohmann::json;
using Bytes = std::vector<std::uint8_t>;

inline std::string to_hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto c : b) {
    s += digits[c >> 4];
    s += digits[c & 0xf];
  }
  return s;
}

inline Bytes from_hex(const std::string& s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  if (s.size() % 2 != 0) throw std::invalid_argument("odd hex length");
  Bytes b(s.size() / 2);
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i] = static_cast<std::uint8_t>(nibble(s[2 * i]) * 16 + nibble(s[2 * i + 1]));
  return b;
}

// Version tag: integer counter plus writer identity, compared
// lexicographically. The initial tag carries the reserved empty client id,
// which sorts below every real (nonempty) client id.
struct Tag {
  std::int64_t z = 0;
  std::string client;

  friend auto operator<=>(const Tag&, const Tag&) = default;
};

inline const Tag kInitialTag{0, {}};

enum class OpKind { write, read };

inline std::string to_string(OpKind k) { return k == OpKind::write ? "write" : "read"; }

inline OpKind op_kind_from_string(const std::string& s) {
  if (s == "write") return OpKind::write;
  if (s == "read") return OpKind::read;
  throw std::invalid_argument("unknown op kind: " + s);
}

// Identifies one client operation: the issuing client plus the operation's
// position in that client's schedule.
struct OperationId {
  std::string client;
  int index = 0;

  friend auto operator<=>(const OperationId&, const OperationId&) = default;
};

enum class Label { pre, fin };

// One coordinate of a codeword: which coordinate, and the share bytes.
struct CodedElement {
  int index = 0;
  Bytes data;

  friend bool operator==(const CodedElement&, const CodedElement&) = default;
};

struct Value {
  Bytes data;

  friend bool operator==(const Value&, const Value&) = default;
};

// Set of replica ids; metadata, never costed.
using LocationSet = std::vector<std::string>;

using Payload = std::variant<std::monostate, Value, CodedElement, LocationSet>;

enum class MessageKind {
  query,
  query_resp,
  pre_write,
  pre_write_ack,
  finalize_write,
  finalize_write_ack,
  finalize_read,
  finalize_read_resp,
  gossip,
  get,
  get_resp,
  put,
  put_ack,
  get_meta,
  get_meta_resp,
  put_meta,
  put_meta_ack,
};

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::query: return "query";
    case MessageKind::query_resp: return "query_resp";
    case MessageKind::pre_write: return "pre_write";
    case MessageKind::pre_write_ack: return "pre_write_ack";
    case MessageKind::finalize_write: return "finalize_write";
    case MessageKind::finalize_write_ack: return "finalize_write_ack";
    case MessageKind::finalize_read: return "finalize_read";
    case MessageKind::finalize_read_resp: return "finalize_read_resp";
    case MessageKind::gossip: return "gossip";
    case MessageKind::get: return "get";
    case MessageKind::get_resp: return "get_resp";
    case MessageKind::put: return "put";
    case MessageKind::put_ack: return "put_ack";
    case MessageKind::get_meta: return "get_meta";
    case MessageKind::get_meta_resp: return "get_meta_resp";
    case MessageKind::put_meta: return "put_meta";
    case MessageKind::put_meta_ack: return "put_meta_ack";
  }
  throw std::logic_error("bad message kind");
}

inline MessageKind message_kind_from_string(const std::string& s) {
  static const std::vector<MessageKind> all = {
      MessageKind::query,          MessageKind::query_resp,
      MessageKind::pre_write,      MessageKind::pre_write_ack,
      MessageKind::finalize_write, MessageKind::finalize_write_ack,
      MessageKind::finalize_read,  MessageKind::finalize_read_resp,
      MessageKind::gossip,         MessageKind::get,
      MessageKind::get_resp,       MessageKind::put,
      MessageKind::put_ack,        MessageKind::get_meta,
      MessageKind::get_meta_resp,  MessageKind::put_meta,
      MessageKind::put_meta_ack,
  };
  for (auto k : all)
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown message kind: " + s);
}

// Cost in value units of shipping a payload when one coded share carries
// 1/k of a value. Metadata (tags, location sets, acks) is free.
inline Rational payload_cost(const Payload& p, int k) {
  if (std::holds_alternative<Value>(p)) return Rational(1);
  if (std::holds_alternative<CodedElement>(p)) return Rational(1, k);
  return Rational(0);
}

inline std::size_t payload_bytes(const Payload& p) {
  if (const auto* v = std::get_if<Value>(&p)) return v->data.size();
  if (const auto* c = std::get_if<CodedElement>(&p)) return c->data.size();
  return 0;
}

struct Message {
  std::uint64_t id = 0;  // assigned by the simulator at send time
  std::string sender;
  std::string recipient;
  OperationId op;  // originating operation; gossip keeps its trigger's op
  MessageKind kind = MessageKind::query;
  std::optional<Tag> tag;
  Payload payload;
  bool reader = false;  // get requests: responder includes the value for reads
  std::uint64_t sent_seq = 0;
  Rational cost{0};
};

// --- canonical JSON -------------------------------------------------------

inline void to_json(Json& j, const Tag& t) { j = Json::array({t.z, t.client}); }

inline void from_json(const Json& j, Tag& t) {
  t.z = j.at(0).get<std::int64_t>();
  t.client = j.at(1).get<std::string>();
}

inline void to_json(Json& j, const OperationId& op) {
  j = Json{{"client", op.client}, {"index", op.index}};
}

inline void from_json(const Json& j, OperationId& op) {
  j.at("client").get_to(op.client);
  j.at("index").get_to(op.index);
}

inline Json payload_to_json(const Payload& p) {
  if (std::holds_alternative<std::monostate>(p)) return nullptr;
  if (const auto* v = std::get_if<Value>(&p)) return Json{{"value", to_hex(v->data)}};
  if (const auto* c = std::get_if<CodedElement>(&p))
    return Json{{"coded", Json{{"index", c->index}, {"data", to_hex(c->data)}}}};
  return Json{{"locations", std::get<LocationSet>(p)}};
}

inline Payload payload_from_json(const Json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.contains("value")) return Value{from_hex(j.at("value").get<std::string>())};
  if (j.contains("coded")) {
    const auto& c = j.at("coded");
    return CodedElement{c.at("index").get<int>(), from_hex(c.at("data").get<std::string>())};
  }
  if (j.contains("locations")) return j.at("locations").get<LocationSet>();
  throw std::invalid_argument("unknown payload form");
}

inline void to_json(Json& j, const Message& m) {
  j = Json{{"id", m.id},
           {"sender", m.sender},
           {"recipient", m.recipient},
           {"op_id", m.op},
           {"kind", to_string(m.kind)},
           {"tag", m.tag ? Json(*m.tag) : Json(nullptr)},
           {"payload", payload_to_json(m.payload)},
           {"reader", m.reader},
           {"sent_seq", m.sent_seq},
           {"cost", to_string(m.cost)}};
}

inline void from_json(const Json& j, Message& m) {
  j.at("id").get_to(m.id);
  j.at("sender").get_to(m.sender);
  j.at("recipient").get_to(m.recipient);
  j.at("op_id").get_to(m.op);
  m.kind = message_kind_from_string(j.at("kind").get<std::string>());
  m.tag = j.at("tag").is_null() ? std::nullopt : std::make_optional(j.at("tag").get<Tag>());
  m.payload = payload_from_json(j.at("payload"));
  j.at("reader").get_to(m.reader);
  j.at("sent_seq").get_to(m.sent_seq);
  m.cost = rational_from_string(j.at("cost").get<std::string>());
}

}  // namespace casim
