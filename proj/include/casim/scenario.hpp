#pragma once

// Scenario configuration: which protocol to run, the client operation
// schedule, the failure schedule, and scheduler scripting. Parsed from JSON;
// invalid configurations throw ConfigError naming the violated constraint.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "casim/core_types.hpp"

namespace casim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Protocol { cas, casgc, ccoas, abd, ldr };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::cas: return "cas";
    case Protocol::casgc: return "casgc";
    case Protocol::ccoas: return "ccoas";
    case Protocol::abd: return "abd";
    case Protocol::ldr: return "ldr";
  }
  throw std::logic_error("bad protocol");
}

inline Protocol protocol_from_string(const std::string& s) {
  if (s == "cas") return Protocol::cas;
  if (s == "casgc") return Protocol::casgc;
  if (s == "ccoas") return Protocol::ccoas;
  if (s == "abd") return Protocol::abd;
  if (s == "ldr") return Protocol::ldr;
  throw ConfigError("unknown protocol: " + s);
}

enum class SchedulerMode { seeded_random, scripted, fair_round_robin };

inline const char* to_string(SchedulerMode m) {
  switch (m) {
    case SchedulerMode::seeded_random: return "seeded_random";
    case SchedulerMode::scripted: return "scripted";
    case SchedulerMode::fair_round_robin: return "fair_round_robin";
  }
  throw std::logic_error("bad scheduler mode");
}

inline SchedulerMode scheduler_mode_from_string(const std::string& s) {
  if (s == "seeded_random") return SchedulerMode::seeded_random;
  if (s == "scripted") return SchedulerMode::scripted;
  if (s == "fair_round_robin") return SchedulerMode::fair_round_robin;
  throw ConfigError("unknown scheduler mode: " + s);
}

// Predicate over messages, used by scheduler holds and delivery triggers.
struct MessageMatch {
  std::optional<MessageKind> kind;
  std::optional<std::string> sender;
  std::optional<std::string> recipient;
  std::vector<std::string> recipient_not;

  bool matches(const Message& m) const {
    if (kind && m.kind != *kind) return false;
    if (sender && m.sender != *sender) return false;
    if (recipient && m.recipient != *recipient) return false;
    for (const auto& r : recipient_not)
      if (m.recipient == r) return false;
    return true;
  }
};

// Monotone trigger used for op start times, crash schedules, and hold
// releases: satisfied from some point of the execution onward.
struct Condition {
  enum class Type { always, at_seq, responded, delivered, quiescent, never, all_of };

  Type type = Type::always;
  std::uint64_t seq = 0;        // at_seq: global event sequence reached
  std::string client;           // responded: that client's op has responded
  int op_index = 0;
  MessageMatch match;           // delivered: nth delivery matching
  int count = 1;
  std::vector<Condition> children;  // all_of: every child satisfied
};

struct OpSpec {
  std::string client;
  OpKind kind = OpKind::write;
  Bytes value;  // writes only; already padded to value_length
  Condition start;
};

struct HoldRule {
  MessageMatch match;
  Condition until;
};

struct SchedulerSpec {
  SchedulerMode mode = SchedulerMode::seeded_random;
  std::uint64_t seed = 0;
  std::vector<HoldRule> holds;
};

struct FailureSpec {
  // Kept in config order for deterministic firing.
  std::vector<std::pair<std::string, Condition>> server_crashes;
  std::vector<std::pair<std::string, Condition>> client_crashes;
};

struct ScenarioConfig {
  std::string id = "scenario";
  Protocol protocol = Protocol::cas;
  int n = 0;
  int f = 0;
  std::optional<int> k_supplied;
  int delta = 0;
  int directory_count = 0;  // ldr only
  int replica_count = 0;    // ldr only
  std::size_t value_length = 1;
  std::vector<std::string> clients;
  std::vector<OpSpec> ops;
  FailureSpec failures;
  SchedulerSpec scheduler;
  std::uint64_t step_budget = 1000000;

  // Share ratio of the protocol's payloads: coded protocols ship 1/k of a
  // value per server, the replication baselines ship whole values.
  int codec_k() const {
    switch (protocol) {
      case Protocol::cas:
      case Protocol::casgc: return k_supplied.value_or(n - 2 * f);
      case Protocol::ccoas: return n - f;
      case Protocol::abd:
      case Protocol::ldr: return 1;
    }
    throw std::logic_error("bad protocol");
  }

  int quorum_threshold() const {
    switch (protocol) {
      case Protocol::cas:
      case Protocol::casgc: return cas_threshold_int(n, codec_k());
      case Protocol::ccoas: return n - f;
      case Protocol::abd: return n / 2 + 1;
      case Protocol::ldr: return directory_count / 2 + 1;  // directory majority
    }
    throw std::logic_error("bad protocol");
  }

  std::vector<std::string> server_ids() const {
    std::vector<std::string> ids;
    if (protocol == Protocol::ldr) {
      for (int i = 1; i <= directory_count; ++i) ids.push_back("dir" + std::to_string(i));
      for (int i = 1; i <= replica_count; ++i) ids.push_back("rep" + std::to_string(i));
    } else {
      for (int i = 1; i <= n; ++i) ids.push_back("s" + std::to_string(i));
    }
    return ids;
  }

  std::vector<std::string> directory_ids() const {
    std::vector<std::string> ids;
    for (int i = 1; i <= directory_count; ++i) ids.push_back("dir" + std::to_string(i));
    return ids;
  }

  std::vector<std::string> replica_ids() const {
    std::vector<std::string> ids;
    for (int i = 1; i <= replica_count; ++i) ids.push_back("rep" + std::to_string(i));
    return ids;
  }

  Bytes initial_value() const { return Bytes(value_length, 0); }

 private:
  static int cas_threshold_int(int n_, int k_) { return (n_ + k_ + 1) / 2; }
};

// --- JSON ------------------------------------------------------------------

inline void to_json(Json& j, const MessageMatch& m) {
  j = Json::object();
  if (m.kind) j["kind"] = to_string(*m.kind);
  if (m.sender) j["from"] = *m.sender;
  if (m.recipient) j["to"] = *m.recipient;
  if (!m.recipient_not.empty()) j["to_not"] = m.recipient_not;
}

inline void from_json(const Json& j, MessageMatch& m) {
  if (j.contains("kind")) m.kind = message_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("from")) m.sender = j.at("from").get<std::string>();
  if (j.contains("to")) m.recipient = j.at("to").get<std::string>();
  if (j.contains("to_not")) m.recipient_not = j.at("to_not").get<std::vector<std::string>>();
}

inline void to_json(Json& j, const Condition& c) {
  switch (c.type) {
    case Condition::Type::always: j = Json(nullptr); return;
    case Condition::Type::at_seq: j = Json{{"seq", c.seq}}; return;
    case Condition::Type::responded:
      j = Json{{"respond", Json{{"client", c.client}, {"op", c.op_index}}}};
      return;
    case Condition::Type::delivered:
      j = Json{{"deliver", c.match}, {"count", c.count}};
      return;
    case Condition::Type::quiescent: j = Json("quiescent"); return;
    case Condition::Type::never: j = Json("never"); return;
    case Condition::Type::all_of: j = Json{{"all", c.children}}; return;
  }
  throw std::logic_error("bad condition");
}

inline void from_json(const Json& j, Condition& c) {
  if (j.is_null()) {
    c.type = Condition::Type::always;
    return;
  }
  if (j.is_number_integer()) {
    c.type = Condition::Type::at_seq;
    c.seq = j.get<std::uint64_t>();
    return;
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "quiescent") {
      c.type = Condition::Type::quiescent;
      return;
    }
    if (s == "never") {
      c.type = Condition::Type::never;
      return;
    }
    throw ConfigError("unknown condition: " + s);
  }
  if (j.contains("seq")) {
    c.type = Condition::Type::at_seq;
    c.seq = j.at("seq").get<std::uint64_t>();
    return;
  }
  if (j.contains("respond")) {
    c.type = Condition::Type::responded;
    const auto& r = j.at("respond");
    c.client = r.at("client").get<std::string>();
    c.op_index = r.value("op", 0);
    return;
  }
  if (j.contains("deliver")) {
    c.type = Condition::Type::delivered;
    c.match = j.at("deliver").get<MessageMatch>();
    c.count = j.value("count", 1);
    return;
  }
  if (j.contains("all")) {
    c.type = Condition::Type::all_of;
    c.children = j.at("all").get<std::vector<Condition>>();
    return;
  }
  throw ConfigError("unknown condition form: " + j.dump());
}

inline void to_json(Json& j, const HoldRule& h) {
  j = Json{{"match", h.match}, {"until", h.until}};
}

inline void from_json(const Json& j, HoldRule& h) {
  j.at("match").get_to(h.match);
  j.at("until").get_to(h.until);
}

inline void validate_scenario(const ScenarioConfig& cfg) {
  if (cfg.id.empty()) throw ConfigError("scenario id must be nonempty");
  if (cfg.value_length < 1) throw ConfigError("value_length must be at least 1");
  if (cfg.step_budget < 1) throw ConfigError("step_budget must be at least 1");

  const bool coded = cfg.protocol == Protocol::cas || cfg.protocol == Protocol::casgc;
  if (cfg.protocol == Protocol::ldr) {
    if (cfg.replica_count < 2 * cfg.f + 1)
      throw ConfigError("ldr requires replica_count >= 2f + 1");
    if (cfg.directory_count < 1) throw ConfigError("ldr requires directory_count >= 1");
    if (cfg.n != 0 && cfg.n != cfg.directory_count + cfg.replica_count)
      throw ConfigError("ldr: n, when given, must equal directory_count + replica_count");
  } else {
    if (cfg.n <= 2 * cfg.f)
      throw ConfigError("n must exceed 2f (got n=" + std::to_string(cfg.n) +
                        ", f=" + std::to_string(cfg.f) + ")");
  }
  if (cfg.f < 0) throw ConfigError("f must be nonnegative");

  if (cfg.k_supplied && !coded) {
    if (cfg.protocol == Protocol::ccoas)
      throw ConfigError("ccoas derives k = n - f; remove k from the config");
    throw ConfigError(std::string(to_string(cfg.protocol)) + " does not take k");
  }
  if (coded) {
    const int k = cfg.codec_k();
    if (k < 1 || k > cfg.n - 2 * cfg.f)
      throw ConfigError("k must satisfy 1 <= k <= n - 2f so that any two quorums "
                        "intersect in k servers (got k=" + std::to_string(k) +
                        ", n=" + std::to_string(cfg.n) + ", f=" + std::to_string(cfg.f) + ")");
  }
  if (cfg.delta != 0 && cfg.protocol != Protocol::casgc)
    throw ConfigError("delta applies to casgc only");
  if (cfg.delta < 0) throw ConfigError("delta must be nonnegative");

  if (cfg.clients.empty()) throw ConfigError("at least one client is required");
  std::set<std::string> client_set;
  std::set<std::string> servers;
  for (const auto& s : cfg.server_ids()) servers.insert(s);
  for (const auto& c : cfg.clients) {
    if (c.empty()) throw ConfigError("client ids must be nonempty (empty id is reserved)");
    if (!client_set.insert(c).second) throw ConfigError("duplicate client id: " + c);
    if (servers.count(c)) throw ConfigError("client id collides with a server id: " + c);
  }
  for (const auto& op : cfg.ops) {
    if (!client_set.count(op.client)) throw ConfigError("op references unknown client: " + op.client);
    if (op.kind == OpKind::write && op.value.size() != cfg.value_length)
      throw ConfigError("write value must have value_length bytes after padding");
    if (op.kind == OpKind::read && !op.value.empty())
      throw ConfigError("read ops take no value");
  }
  for (const auto& [node, cond] : cfg.failures.server_crashes) {
    (void)cond;
    if (!servers.count(node)) throw ConfigError("failure schedule references unknown server: " + node);
  }
  for (const auto& [node, cond] : cfg.failures.client_crashes) {
    (void)cond;
    if (!client_set.count(node)) throw ConfigError("failure schedule references unknown client: " + node);
  }
}

inline void to_json(Json& j, const ScenarioConfig& cfg) {
  j = Json::object();
  j["id"] = cfg.id;
  j["protocol"] = to_string(cfg.protocol);
  if (cfg.protocol == Protocol::ldr) {
    j["directory_count"] = cfg.directory_count;
    j["replica_count"] = cfg.replica_count;
  } else {
    j["n"] = cfg.n;
  }
  j["f"] = cfg.f;
  if (cfg.protocol == Protocol::cas || cfg.protocol == Protocol::casgc)
    j["k"] = cfg.codec_k();
  if (cfg.protocol == Protocol::casgc) j["delta"] = cfg.delta;
  j["value_length"] = cfg.value_length;
  j["clients"] = cfg.clients;
  Json ops = Json::array();
  for (const auto& op : cfg.ops) {
    Json o{{"client", op.client}, {"kind", to_string(op.kind)}};
    if (op.kind == OpKind::write) o["value_hex"] = to_hex(op.value);
    if (op.start.type != Condition::Type::always) o["after"] = op.start;
    ops.push_back(std::move(o));
  }
  j["ops"] = std::move(ops);
  Json failures = Json::object();
  if (!cfg.failures.server_crashes.empty()) {
    Json s = Json::array();
    for (const auto& [node, cond] : cfg.failures.server_crashes)
      s.push_back(Json{{"node", node}, {"when", cond}});
    failures["servers"] = std::move(s);
  }
  if (!cfg.failures.client_crashes.empty()) {
    Json c = Json::array();
    for (const auto& [node, cond] : cfg.failures.client_crashes)
      c.push_back(Json{{"node", node}, {"when", cond}});
    failures["clients"] = std::move(c);
  }
  j["failures"] = std::move(failures);
  Json sched{{"mode", to_string(cfg.scheduler.mode)}, {"seed", cfg.scheduler.seed}};
  if (!cfg.scheduler.holds.empty()) sched["script"] = Json{{"holds", cfg.scheduler.holds}};
  j["scheduler"] = std::move(sched);
  j["step_budget"] = cfg.step_budget;
}

inline void from_json(const Json& j, ScenarioConfig& cfg) {
  cfg = ScenarioConfig{};
  cfg.id = j.value("id", std::string("scenario"));
  cfg.protocol = protocol_from_string(j.at("protocol").get<std::string>());
  cfg.n = j.value("n", 0);
  cfg.f = j.value("f", 0);
  if (j.contains("k")) cfg.k_supplied = j.at("k").get<int>();
  cfg.delta = j.value("delta", 0);
  cfg.directory_count = j.value("directory_count", 0);
  cfg.replica_count = j.value("replica_count", 0);
  if (cfg.protocol == Protocol::ldr && cfg.n == 0)
    cfg.n = cfg.directory_count + cfg.replica_count;
  cfg.value_length = j.at("value_length").get<std::size_t>();
  cfg.clients = j.at("clients").get<std::vector<std::string>>();
  for (const auto& o : j.at("ops")) {
    OpSpec op;
    op.client = o.at("client").get<std::string>();
    op.kind = op_kind_from_string(o.at("kind").get<std::string>());
    if (o.contains("value_hex")) {
      op.value = from_hex(o.at("value_hex").get<std::string>());
    } else if (o.contains("value")) {
      const auto s = o.at("value").get<std::string>();
      op.value.assign(s.begin(), s.end());
    }
    if (op.kind == OpKind::write) {
      if (op.value.size() > cfg.value_length)
        throw ConfigError("write value longer than value_length");
      op.value.resize(cfg.value_length, 0);
    }
    if (o.contains("at")) {
      op.start.type = Condition::Type::at_seq;
      op.start.seq = o.at("at").get<std::uint64_t>();
    }
    if (o.contains("after")) o.at("after").get_to(op.start);
    cfg.ops.push_back(std::move(op));
  }
  if (j.contains("failures")) {
    const auto& fj = j.at("failures");
    auto parse_side = [](const Json& side) {
      std::vector<std::pair<std::string, Condition>> out;
      if (side.is_array()) {
        for (const auto& e : side)
          out.emplace_back(e.at("node").get<std::string>(), e.at("when").get<Condition>());
      } else {
        for (auto it = side.begin(); it != side.end(); ++it)
          out.emplace_back(it.key(), it.value().get<Condition>());
      }
      return out;
    };
    if (fj.contains("servers")) cfg.failures.server_crashes = parse_side(fj.at("servers"));
    if (fj.contains("clients")) cfg.failures.client_crashes = parse_side(fj.at("clients"));
  }
  if (j.contains("scheduler")) {
    const auto& sj = j.at("scheduler");
    cfg.scheduler.mode = scheduler_mode_from_string(sj.value("mode", std::string("seeded_random")));
    cfg.scheduler.seed = sj.value("seed", std::uint64_t{0});
    if (sj.contains("script") && sj.at("script").contains("holds"))
      cfg.scheduler.holds = sj.at("script").at("holds").get<std::vector<HoldRule>>();
  }
  cfg.step_budget = j.value("step_budget", std::uint64_t{1000000});
  validate_scenario(cfg);
}

inline ScenarioConfig parse_scenario(const Json& j) { return j.get<ScenarioConfig>(); }

}  // namespace casim
