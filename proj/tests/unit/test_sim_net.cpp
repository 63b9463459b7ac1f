#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "casim/harness.hpp"
#include "casim/scenario.hpp"
#include "casim/sim_net.hpp"
#include "casim/trace.hpp"
#include "support/sweep_builders.hpp"

namespace {

using namespace casim;

// A deliberately dumb protocol: the client pings every server, each server
// echoes back, and the client responds after `need` echoes. Message flow is
// obvious enough that scheduler behavior can be asserted exactly.
class EchoServer : public ServerNode {
 public:
  explicit EchoServer(std::string id) : id_(std::move(id)) {}

  void handle(const Message& m, Outbox& out) override {
    if (m.kind == MessageKind::get)
      out.send(id_, m.sender, m.op, MessageKind::get_resp, m.tag);
  }

  Rational storage_units() const override { return Rational(1); }

 private:
  std::string id_;
};

class EchoClient : public ClientNode {
 public:
  EchoClient(std::string id, std::vector<std::string> servers, int need)
      : id_(std::move(id)), servers_(std::move(servers)), need_(need) {}

  void invoke(const OperationId& op, OpKind kind, const Bytes&, Outbox& out) override {
    op_ = op;
    kind_ = kind;
    acks_ = 0;
    for (const auto& s : servers_) out.send(id_, s, op, MessageKind::get);
  }

  void handle(const Message& m, Outbox& out) override {
    if (!op_ || !(m.op == *op_) || m.kind != MessageKind::get_resp) return;
    if (++acks_ != need_) return;
    Response r;
    r.op = *op_;
    r.kind = kind_;
    if (kind_ == OpKind::read) r.value = Bytes{};
    out.response = std::move(r);
  }

 private:
  std::string id_;
  std::vector<std::string> servers_;
  int need_;
  std::optional<OperationId> op_;
  OpKind kind_ = OpKind::write;
  int acks_ = 0;
};

ProtocolInstance echo_protocol(const ScenarioConfig& cfg, int need) {
  ProtocolInstance p;
  for (const auto& id : cfg.server_ids())
    p.servers.emplace_back(id, std::make_unique<EchoServer>(id));
  for (const auto& c : cfg.clients)
    p.clients.emplace(c, std::make_unique<EchoClient>(c, cfg.server_ids(), need));
  return p;
}

Json echo_json(int n) {
  Json j;
  j["id"] = "echo";
  j["protocol"] = "cas";
  j["n"] = n;
  j["f"] = 1;
  j["k"] = 1;
  j["value_length"] = 2;
  j["clients"] = Json::array({"c1"});
  j["ops"] = Json::array({Json{{"client", "c1"}, {"kind", "write"}, {"value", "v"}}});
  j["scheduler"] = Json{{"mode", "fair_round_robin"}};
  return j;
}

ExecutionTrace run_echo(const Json& j, int need) {
  auto cfg = j.get<ScenarioConfig>();
  Simulator sim(cfg, echo_protocol(cfg, need));
  return sim.run();
}

std::vector<std::uint64_t> delivered_ids(const ExecutionTrace& t) {
  std::vector<std::uint64_t> out;
  for (const auto& e : t.events)
    if (e.kind == EventKind::deliver && e.msg_id) out.push_back(*e.msg_id);
  return out;
}

std::optional<std::uint64_t> event_seq(const ExecutionTrace& t, EventKind kind,
                                       const OperationId& op) {
  for (const auto& e : t.events)
    if (e.kind == kind && e.op && *e.op == op) return e.seq;
  return std::nullopt;
}

const Event* find_halt(const ExecutionTrace& t) {
  const Event& last = t.events.back();
  REQUIRE(last.node == "sim");
  REQUIRE(last.detail.contains("halt"));
  return &last;
}

}  // namespace

TEST_CASE("same config and seed reproduce the trace byte for byte") {
  testing::SweepSpec spec;
  spec.protocol = Protocol::cas;
  ScenarioConfig cfg = testing::history_config(spec, 7);

  ExecutionTrace a = run_config(cfg);
  ExecutionTrace b = run_config(cfg);
  REQUIRE(trace_to_string(a) == trace_to_string(b));
  REQUIRE(check_structure(a).ok);

  ScenarioConfig other = cfg;
  other.scheduler.seed += 1;
  ExecutionTrace c = run_config(other);
  REQUIRE(trace_to_string(a) != trace_to_string(c));
}

TEST_CASE("fair round robin delivers the oldest pending message") {
  ExecutionTrace t = run_echo(echo_json(3), 3);

  // Invoke sends pings 1..3; each echo is queued behind the older pings, so
  // ids come out strictly in send order.
  REQUIRE(delivered_ids(t) == std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6});
  REQUIRE(check_structure(t).ok);
  REQUIRE(enforce_fairness(t));
  REQUIRE(event_seq(t, EventKind::respond, {"c1", 0}).has_value());

  REQUIRE(t.initial_storage == Rational(3));
  for (const auto& e : t.events) REQUIRE(e.storage == Rational(3));

  const Event* halt = find_halt(t);
  REQUIRE(halt->detail.at("halt") == "quiescent");
  REQUIRE(halt->detail.at("uninvoked") == 0);
  REQUIRE(t.stalled_ops.empty());
  REQUIRE(t.undelivered.empty());
}

TEST_CASE("structure checker catches corrupted traces") {
  ExecutionTrace t = run_echo(echo_json(3), 3);
  REQUIRE(check_structure(t).ok);

  auto first_deliver = [](ExecutionTrace& tr) -> Event& {
    for (auto& e : tr.events)
      if (e.kind == EventKind::deliver) return e;
    FAIL("no deliver event");
    return tr.events.front();
  };

  SECTION("sequence gap") {
    ExecutionTrace bad = t;
    bad.events[2].seq += 1;
    auto check = check_structure(bad);
    REQUIRE_FALSE(check.ok);
    REQUIRE_FALSE(check.problems.empty());
  }

  SECTION("delivery of a message nobody sent") {
    ExecutionTrace bad = t;
    first_deliver(bad).msg_id = 999;
    auto check = check_structure(bad);
    REQUIRE_FALSE(check.ok);
  }

  SECTION("double delivery") {
    ExecutionTrace bad = t;
    std::vector<Event*> delivers;
    for (auto& e : bad.events)
      if (e.kind == EventKind::deliver) delivers.push_back(&e);
    REQUIRE(delivers.size() >= 2);
    delivers[1]->msg_id = delivers[0]->msg_id;
    auto check = check_structure(bad);
    REQUIRE_FALSE(check.ok);
  }

  SECTION("send stamped with the wrong seq") {
    ExecutionTrace bad = t;
    bad.events.front().sends.front().sent_seq += 1;
    auto check = check_structure(bad);
    REQUIRE_FALSE(check.ok);
  }
}

TEST_CASE("server crash discards pending inbound and zeroes its storage") {
  Json j = echo_json(3);
  j["failures"] = Json{{"servers", Json::array({Json{{"node", "s2"}, {"when", Json{{"seq", 2}}}}})}};
  ExecutionTrace t = run_echo(j, 2);

  // Ping 2 sits in s2's channel when the crash fires at seq 2.
  const Event& crash = t.events[1];
  REQUIRE(crash.kind == EventKind::crash);
  REQUIRE(crash.node == "s2");
  REQUIRE(crash.detail.at("discarded") == Json::array({2}));
  REQUIRE(crash.storage == Rational(2));
  REQUIRE(t.initial_storage == Rational(3));

  REQUIRE_FALSE(t.delivery_seq(2).has_value());
  REQUIRE(event_seq(t, EventKind::respond, {"c1", 0}).has_value());

  // Discarded messages are accounted for by the crash, not left dangling.
  REQUIRE(t.undelivered.empty());
  REQUIRE(enforce_fairness(t));
  REQUIRE(check_structure(t).ok);
}

TEST_CASE("sends to a crashed server become dropped deliveries") {
  Json j = echo_json(3);
  j["ops"].push_back(Json{{"client", "c1"}, {"kind", "write"}, {"value", "w"}});
  j["failures"] = Json{{"servers", Json::array({Json{{"node", "s2"}, {"when", Json{{"seq", 2}}}}})}};
  ExecutionTrace t = run_echo(j, 2);

  REQUIRE(event_seq(t, EventKind::respond, {"c1", 0}).has_value());
  REQUIRE(event_seq(t, EventKind::respond, {"c1", 1}).has_value());

  // The second op still pings s2; that delivery lands as a drop and runs no
  // handler, so s2 never sends anything in the whole run.
  bool saw_drop = false;
  for (const auto& e : t.events) {
    if (e.kind == EventKind::deliver && e.node == "s2") {
      REQUIRE(e.dropped);
      REQUIRE(e.sends.empty());
      saw_drop = true;
    }
    for (const auto& m : e.sends) REQUIRE(m.sender != "s2");
  }
  REQUIRE(saw_drop);
  REQUIRE(t.undelivered.empty());
  REQUIRE(enforce_fairness(t));
}

TEST_CASE("a crashed client is not stalled and its replies drop") {
  Json j = echo_json(3);
  j["failures"] = Json{{"clients", Json::array({Json{{"node", "c1"}, {"when", Json{{"seq", 2}}}}})}};
  ExecutionTrace t = run_echo(j, 3);

  const Event& crash = t.events[1];
  REQUIRE(crash.kind == EventKind::crash);
  REQUIRE(crash.node == "c1");
  REQUIRE_FALSE(crash.detail.contains("discarded"));
  REQUIRE(crash.storage == Rational(3));

  // Servers still see the pings and echo; the echoes drop at the dead client.
  int drops = 0;
  for (const auto& e : t.events)
    if (e.kind == EventKind::deliver && e.node == "c1") {
      REQUIRE(e.dropped);
      ++drops;
    }
  REQUIRE(drops == 3);

  REQUIRE_FALSE(event_seq(t, EventKind::respond, {"c1", 0}).has_value());
  REQUIRE(t.stalled_ops.empty());
  REQUIRE(t.undelivered.empty());
  REQUIRE(enforce_fairness(t));
}

TEST_CASE("step budget exhaustion is reported and flagged") {
  Json j = echo_json(3);
  j["step_budget"] = 3;
  ExecutionTrace t = run_echo(j, 3);

  REQUIRE(t.budget_exhausted);
  REQUIRE(find_halt(t)->detail.at("halt") == "budget_exhausted");
  REQUIRE(t.events.size() == 4);  // three steps plus the halt record
  REQUIRE(t.stalled_ops == std::vector<OperationId>{{"c1", 0}});
}

TEST_CASE("a never hold starves the target and shows up at halt") {
  Json j = echo_json(3);
  j["scheduler"]["script"] = Json{{"holds", Json::array({Json{
      {"match", Json{{"kind", "get"}, {"to", "s3"}}}, {"until", "never"}}})}};
  ExecutionTrace t = run_echo(j, 3);

  REQUIRE(find_halt(t)->detail.at("halt") == "quiescent");
  REQUIRE(t.stalled_ops == std::vector<OperationId>{{"c1", 0}});
  REQUIRE(t.undelivered == std::vector<std::uint64_t>{3});
  REQUIRE_FALSE(enforce_fairness(t));
  REQUIRE(check_structure(t).ok);
}

TEST_CASE("a quiescent hold releases once nothing else can move") {
  Json j = echo_json(3);
  j["scheduler"]["script"] = Json{{"holds", Json::array({Json{
      {"match", Json{{"kind", "get"}, {"to", "s3"}}}, {"until", "quiescent"}}})}};
  ExecutionTrace t = run_echo(j, 3);

  // Ping 3 waits out everything else, then the echo chain finishes the op.
  REQUIRE(delivered_ids(t) == std::vector<std::uint64_t>{1, 2, 4, 5, 3, 6});
  REQUIRE(event_seq(t, EventKind::respond, {"c1", 0}).has_value());
  REQUIRE(enforce_fairness(t));
}

TEST_CASE("a seq hold releases by forcing time forward at quiescence") {
  Json j = echo_json(3);
  j["scheduler"]["script"] = Json{{"holds", Json::array({Json{
      {"match", Json{{"kind", "get"}, {"to", "s3"}}},
      {"until", Json{{"seq", 40}}}}})}};
  ExecutionTrace t = run_echo(j, 3);

  // The run quiesces long before seq 40; the release is forced rather than
  // leaving the channel silently unfair.
  REQUIRE(delivered_ids(t) == std::vector<std::uint64_t>{1, 2, 4, 5, 3, 6});
  REQUIRE(event_seq(t, EventKind::respond, {"c1", 0}).has_value());
  REQUIRE(t.events.back().seq < 40);
  REQUIRE(enforce_fairness(t));
}

TEST_CASE("at seq triggers force at quiescence with crashes winning ties") {
  Json j = echo_json(3);
  j["ops"].push_back(Json{{"client", "c1"}, {"kind", "write"}, {"value", "w"},
                          {"after", Json{{"seq", 300}}}});
  j["failures"] = Json{{"servers", Json::array({Json{{"node", "s1"}, {"when", Json{{"seq", 300}}}}})}};
  ExecutionTrace t = run_echo(j, 2);

  auto crash_seq = [&]() -> std::optional<std::uint64_t> {
    for (const auto& e : t.events)
      if (e.kind == EventKind::crash) return e.seq;
    return std::nullopt;
  }();
  auto invoke1 = event_seq(t, EventKind::invoke, {"c1", 1});

  REQUIRE(crash_seq.has_value());
  REQUIRE(invoke1.has_value());
  REQUIRE(*crash_seq < *invoke1);
  REQUIRE(*invoke1 < 300);
  REQUIRE(event_seq(t, EventKind::respond, {"c1", 1}).has_value());
  REQUIRE(t.stalled_ops.empty());
}

TEST_CASE("conjunction triggers wait for every leg") {
  Json j = echo_json(3);
  j["clients"] = Json::array({"c1", "c2"});

  SECTION("both legs eventually hold") {
    j["ops"].push_back(Json{
        {"client", "c2"}, {"kind", "write"}, {"value", "w"},
        {"after", Json{{"all", Json::array({
             Json{{"respond", Json{{"client", "c1"}, {"op", 0}}}},
             Json{{"deliver", Json{{"kind", "get_resp"}, {"to", "c1"}}}, {"count", 2}}})}}}});
    ExecutionTrace t = run_echo(j, 2);

    auto respond_c1 = event_seq(t, EventKind::respond, {"c1", 0});
    auto invoke_c2 = event_seq(t, EventKind::invoke, {"c2", 0});
    REQUIRE(respond_c1.has_value());
    REQUIRE(invoke_c2.has_value());
    REQUIRE(*invoke_c2 > *respond_c1);
    REQUIRE(event_seq(t, EventKind::respond, {"c2", 0}).has_value());
  }

  SECTION("a never leg pins the op to uninvoked") {
    j["ops"].push_back(Json{
        {"client", "c2"}, {"kind", "write"}, {"value", "w"},
        {"after", Json{{"all", Json::array({
             Json{{"respond", Json{{"client", "c1"}, {"op", 0}}}}, "never"})}}}});
    ExecutionTrace t = run_echo(j, 2);

    REQUIRE_FALSE(event_seq(t, EventKind::invoke, {"c2", 0}).has_value());
    REQUIRE(find_halt(t)->detail.at("uninvoked") == 1);
    REQUIRE(t.stalled_ops.empty());
  }
}

TEST_CASE("clients run one operation at a time in listed order") {
  Json j = echo_json(3);
  j["ops"].push_back(Json{{"client", "c1"}, {"kind", "write"}, {"value", "w"}});
  j["ops"].push_back(Json{{"client", "c1"}, {"kind", "read"}});
  ExecutionTrace t = run_echo(j, 2);

  for (int i = 0; i < 3; ++i)
    REQUIRE(event_seq(t, EventKind::respond, {"c1", i}).has_value());
  for (int i = 1; i < 3; ++i) {
    auto prev_done = event_seq(t, EventKind::respond, {"c1", i - 1});
    auto next_start = event_seq(t, EventKind::invoke, {"c1", i});
    REQUIRE(*next_start > *prev_done);
  }
}

TEST_CASE("seeded random schedules vary by seed but stay reproducible") {
  std::set<std::vector<std::uint64_t>> orders;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Json j = echo_json(4);
    j["scheduler"] = Json{{"mode", "seeded_random"}, {"seed", seed}};

    ExecutionTrace a = run_echo(j, 4);
    ExecutionTrace b = run_echo(j, 4);
    REQUIRE(trace_to_string(a) == trace_to_string(b));
    REQUIRE(check_structure(a).ok);
    REQUIRE(enforce_fairness(a));
    REQUIRE(event_seq(a, EventKind::respond, {"c1", 0}).has_value());
    orders.insert(delivered_ids(a));
  }
  REQUIRE(orders.size() > 1);
}
