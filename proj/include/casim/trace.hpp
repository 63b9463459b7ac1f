#pragma once

// Execution traces: the totally ordered event log one simulation run emits,
// its JSON-lines serialization (one event per line, config echoed in the
// opening line), and trace-level structural checks.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "casim/core_types.hpp"
#include "casim/scenario.hpp"

namespace casim {

enum class EventKind { invoke, deliver, crash, respond, internal };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::invoke: return "invoke";
    case EventKind::deliver: return "deliver";
    case EventKind::crash: return "crash";
    case EventKind::respond: return "respond";
    case EventKind::internal: return "internal";
  }
  throw std::logic_error("bad event kind");
}

inline EventKind event_kind_from_string(const std::string& s) {
  if (s == "invoke") return EventKind::invoke;
  if (s == "deliver") return EventKind::deliver;
  if (s == "crash") return EventKind::crash;
  if (s == "respond") return EventKind::respond;
  if (s == "internal") return EventKind::internal;
  throw std::invalid_argument("unknown event kind: " + s);
}

// State changes a node reports while handling one event, in terms the
// analysis can replay: which tags gained or lost a stored payload at this
// node and which tags were first seen finalized here.
struct Effects {
  std::vector<Tag> payload_added;
  std::vector<Tag> payload_removed;
  std::vector<Tag> fin_added;

  bool empty() const {
    return payload_added.empty() && payload_removed.empty() && fin_added.empty();
  }
};

inline void to_json(Json& j, const Effects& e) {
  j = Json::object();
  if (!e.payload_added.empty()) j["payload_added"] = e.payload_added;
  if (!e.payload_removed.empty()) j["payload_removed"] = e.payload_removed;
  if (!e.fin_added.empty()) j["fin_added"] = e.fin_added;
}

inline void from_json(const Json& j, Effects& e) {
  if (j.contains("payload_added")) e.payload_added = j.at("payload_added").get<std::vector<Tag>>();
  if (j.contains("payload_removed")) e.payload_removed = j.at("payload_removed").get<std::vector<Tag>>();
  if (j.contains("fin_added")) e.fin_added = j.at("fin_added").get<std::vector<Tag>>();
}

struct Event {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::internal;
  std::string node;
  std::optional<OperationId> op;
  std::optional<std::uint64_t> msg_id;  // deliver events
  bool dropped = false;                 // deliver chosen for a crashed node
  std::vector<Message> sends;           // messages emitted while handling this event
  Effects effects;
  Json detail;  // kind-specific extras (op_kind, value, tag, halt summary, ...)
  Rational storage{0};  // total storage at non-failed servers after this event
};

inline void to_json(Json& j, const Event& e) {
  j = Json::object();
  j["seq"] = e.seq;
  j["kind"] = to_string(e.kind);
  j["node"] = e.node;
  if (e.op) j["op"] = *e.op;
  if (e.msg_id) j["msg_id"] = *e.msg_id;
  if (e.dropped) j["dropped"] = true;
  if (!e.sends.empty()) j["sends"] = e.sends;
  if (!e.effects.empty()) j["effects"] = e.effects;
  if (!e.detail.is_null()) j["detail"] = e.detail;
  j["storage"] = to_string(e.storage);
}

inline void from_json(const Json& j, Event& e) {
  e.seq = j.at("seq").get<std::uint64_t>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.node = j.at("node").get<std::string>();
  if (j.contains("op")) e.op = j.at("op").get<OperationId>();
  if (j.contains("msg_id")) e.msg_id = j.at("msg_id").get<std::uint64_t>();
  e.dropped = j.value("dropped", false);
  if (j.contains("sends")) e.sends = j.at("sends").get<std::vector<Message>>();
  if (j.contains("effects")) e.effects = j.at("effects").get<Effects>();
  if (j.contains("detail")) e.detail = j.at("detail");
  e.storage = rational_from_string(j.at("storage").get<std::string>());
}

struct ExecutionTrace {
  ScenarioConfig config;
  std::vector<Event> events;

  Rational initial_storage{0};
  bool budget_exhausted = false;
  std::vector<OperationId> stalled_ops;       // invoked, unresponded, client alive
  std::vector<std::uint64_t> undelivered;     // message ids never delivered

  const Message* find_message(std::uint64_t id) const {
    ensure_index();
    auto it = msg_index_.find(id);
    if (it == msg_index_.end()) return nullptr;
    return &events[it->second.first].sends[it->second.second];
  }

  // Seq of the deliver event for a message, if it was delivered.
  std::optional<std::uint64_t> delivery_seq(std::uint64_t id) const {
    ensure_index();
    auto it = delivery_index_.find(id);
    if (it == delivery_index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  void ensure_index() const {
    if (indexed_) return;
    for (std::size_t e = 0; e < events.size(); ++e) {
      for (std::size_t s = 0; s < events[e].sends.size(); ++s)
        msg_index_[events[e].sends[s].id] = {e, s};
      if (events[e].kind == EventKind::deliver && events[e].msg_id && !events[e].dropped)
        delivery_index_[*events[e].msg_id] = events[e].seq;
    }
    indexed_ = true;
  }

  mutable bool indexed_ = false;
  mutable std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> msg_index_;
  mutable std::map<std::uint64_t, std::uint64_t> delivery_index_;
};

inline void write_trace(const ExecutionTrace& trace, std::ostream& os) {
  Json header = Json::object();
  header["seq"] = 0;
  header["kind"] = "internal";
  header["node"] = "sim";
  header["detail"] = Json{{"config", trace.config}};
  header["storage"] = to_string(trace.initial_storage);
  os << header.dump() << "\n";
  for (const auto& e : trace.events) os << Json(e).dump() << "\n";
}

inline std::string trace_to_string(const ExecutionTrace& trace) {
  std::ostringstream os;
  write_trace(trace, os);
  return os.str();
}

inline ExecutionTrace read_trace(std::istream& is) {
  ExecutionTrace trace;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (!header_seen) {
      if (!(j.contains("detail") && j.at("detail").contains("config")))
        throw std::invalid_argument("trace must open with a config header line");
      trace.config = j.at("detail").at("config").get<ScenarioConfig>();
      trace.initial_storage = rational_from_string(j.at("storage").get<std::string>());
      header_seen = true;
      continue;
    }
    trace.events.push_back(j.get<Event>());
  }
  if (!header_seen) throw std::invalid_argument("empty trace");
  // Recover the halt summary written by the simulator.
  if (!trace.events.empty()) {
    const auto& last = trace.events.back();
    if (last.kind == EventKind::internal && last.detail.contains("halt")) {
      trace.budget_exhausted = last.detail.at("halt") == "budget_exhausted";
      if (last.detail.contains("stalled_ops"))
        trace.stalled_ops = last.detail.at("stalled_ops").get<std::vector<OperationId>>();
      if (last.detail.contains("undelivered"))
        trace.undelivered = last.detail.at("undelivered").get<std::vector<std::uint64_t>>();
    }
  }
  return trace;
}

// Structural sanity: sends precede their deliveries, no message is delivered
// twice, sequence numbers are dense and increasing.
struct TraceCheck {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string p) {
    ok = false;
    problems.push_back(std::move(p));
  }
};

inline TraceCheck check_structure(const ExecutionTrace& trace) {
  TraceCheck out;
  std::map<std::uint64_t, std::uint64_t> sent_at;
  std::map<std::uint64_t, int> delivered_count;
  std::uint64_t expect_seq = 1;
  for (const auto& e : trace.events) {
    if (e.seq != expect_seq) out.fail("non-dense seq at " + std::to_string(e.seq));
    expect_seq = e.seq + 1;
    for (const auto& m : e.sends) {
      if (m.sent_seq != e.seq) out.fail("send seq mismatch for message " + std::to_string(m.id));
      if (!sent_at.emplace(m.id, e.seq).second)
        out.fail("duplicate message id " + std::to_string(m.id));
    }
    if (e.kind == EventKind::deliver && e.msg_id) {
      auto it = sent_at.find(*e.msg_id);
      if (it == sent_at.end()) {
        out.fail("delivery before send for message " + std::to_string(*e.msg_id));
      } else if (it->second >= e.seq) {
        out.fail("delivery does not follow send for message " + std::to_string(*e.msg_id));
      }
      if (++delivered_count[*e.msg_id] > 1)
        out.fail("message delivered twice: " + std::to_string(*e.msg_id));
    }
  }
  return out;
}

// True iff every message sent to a node that never crashed was delivered.
inline bool enforce_fairness(const ExecutionTrace& trace) {
  std::map<std::uint64_t, const Message*> sent;
  std::set<std::uint64_t> delivered;
  std::set<std::string> crashed;
  for (const auto& e : trace.events) {
    for (const auto& m : e.sends) sent[m.id] = &m;
    if (e.kind == EventKind::deliver && e.msg_id) delivered.insert(*e.msg_id);
    if (e.kind == EventKind::crash) crashed.insert(e.node);
  }
  for (const auto& [id, m] : sent) {
    if (crashed.count(m->recipient)) continue;
    if (!delivered.count(id)) return false;
  }
  return true;
}

}  // namespace casim
