#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <string>
#include <vector>

#include "casim/harness.hpp"
#include "casim/protocol_casgc.hpp"
#include "casim/sim_net.hpp"
#include "casim/trace.hpp"

namespace {

using namespace casim;

Message msg(MessageKind kind, std::string from, std::optional<Tag> tag = std::nullopt,
            Payload payload = {}) {
  Message m;
  m.sender = std::move(from);
  m.recipient = "s1";
  m.op = OperationId{"w9", 0};
  m.kind = kind;
  m.tag = std::move(tag);
  m.payload = std::move(payload);
  return m;
}

CasGcServer bare_server(int delta) {
  return CasGcServer("s1", 0, {"s1", "s2", "s3"}, CodecParams{3, 2}, Bytes(4, 0), delta);
}

// Runs one write-and-finalize round against the server.
void write_tag(CasGcServer& s, const Tag& t, Outbox& fin_out) {
  Outbox pw;
  s.handle(msg(MessageKind::pre_write, t.client, t, CodedElement{0, Bytes{1, 2}}), pw);
  s.handle(msg(MessageKind::finalize_write, t.client, t), fin_out);
}

const Event* respond_event(const ExecutionTrace& t, const OperationId& op) {
  for (const auto& e : t.events)
    if (e.kind == EventKind::respond && e.op && *e.op == op) return &e;
  return nullptr;
}

}  // namespace

TEST_CASE("gc keeps payloads for the delta plus one newest finalized tags") {
  CasGcServer s = bare_server(1);
  REQUIRE(s.storage_units() == Rational(1, 2));  // the initial triple

  // Two finalized tags fit the window of two; nothing is collected.
  Outbox fin1;
  write_tag(s, Tag{1, "w"}, fin1);
  REQUIRE(fin1.effects.payload_removed.empty());
  REQUIRE(s.storage_units() == Rational(1));

  // The third finalization pushes the initial tag below the cutoff.
  Outbox fin2;
  write_tag(s, Tag{2, "w"}, fin2);
  REQUIRE(fin2.effects.payload_removed == std::vector<Tag>{kInitialTag});
  REQUIRE(s.storage_units() == Rational(1));

  Outbox fin3;
  write_tag(s, Tag{3, "w"}, fin3);
  REQUIRE(fin3.effects.payload_removed == std::vector<Tag>{Tag{1, "w"}});
  REQUIRE(s.storage_units() == Rational(1));

  Outbox q;
  s.handle(msg(MessageKind::query, "r1"), q);
  REQUIRE(q.sends[0].tag == Tag{3, "w"});
}

TEST_CASE("delta zero keeps only the single newest finalized payload") {
  CasGcServer s = bare_server(0);
  Outbox fin;
  write_tag(s, Tag{1, "w"}, fin);
  REQUIRE(fin.effects.payload_removed == std::vector<Tag>{kInitialTag});
  REQUIRE(s.storage_units() == Rational(1, 2));
}

TEST_CASE("a pre write below the cutoff is collected on arrival") {
  CasGcServer s = bare_server(1);
  Outbox fin2, fin3;
  write_tag(s, Tag{2, "w"}, fin2);
  write_tag(s, Tag{3, "w"}, fin3);
  Rational settled = s.storage_units();

  // A straggler pre-write with a tag under the cutoff is stored and swept in
  // the same receipt, so the net storage change is zero.
  Outbox late;
  s.handle(msg(MessageKind::pre_write, "v", Tag{1, "v"}, CodedElement{0, Bytes{9, 9}}), late);
  REQUIRE(late.effects.payload_added == std::vector<Tag>{Tag{1, "v"}});
  REQUIRE(late.effects.payload_removed == std::vector<Tag>{Tag{1, "v"}});
  REQUIRE(late.sends.size() == 1);
  REQUIRE(late.sends[0].kind == MessageKind::pre_write_ack);
  REQUIRE(s.storage_units() == settled);
}

TEST_CASE("finalize read on a collected tag stays silent") {
  CasGcServer s = bare_server(1);
  Outbox fin1, fin2, fin3;
  write_tag(s, Tag{1, "w"}, fin1);
  write_tag(s, Tag{2, "w"}, fin2);
  write_tag(s, Tag{3, "w"}, fin3);

  // Tag 1 was finalized, then collected. The server must not answer with an
  // element it no longer has, and it must not answer element-free either,
  // because that would let a read decode a value that can no longer exist.
  Outbox silent;
  s.handle(msg(MessageKind::finalize_read, "r1", Tag{1, "w"}), silent);
  REQUIRE(silent.sends.empty());
  REQUIRE(silent.effects.empty());

  // A collected tag whose label was still pre is finalized quietly.
  Outbox late;
  s.handle(msg(MessageKind::pre_write, "v", Tag{1, "v"}, CodedElement{0, Bytes{9, 9}}), late);
  Outbox quiet_fin;
  s.handle(msg(MessageKind::finalize_read, "r1", Tag{1, "v"}), quiet_fin);
  REQUIRE(quiet_fin.effects.fin_added == std::vector<Tag>{Tag{1, "v"}});
  for (const auto& m : quiet_fin.sends)
    REQUIRE(m.kind != MessageKind::finalize_read_resp);

  // Unknown tags above the cutoff still get the element-free response.
  Outbox unknown;
  s.handle(msg(MessageKind::finalize_read, "r1", Tag{9, "x"}), unknown);
  bool answered = false;
  for (const auto& m : unknown.sends)
    if (m.kind == MessageKind::finalize_read_resp) answered = true;
  REQUIRE(answered);
}

TEST_CASE("casgc end to end trims storage while reads stay correct") {
  Json j;
  j["id"] = "casgc-run";
  j["protocol"] = "casgc";
  j["n"] = 5;
  j["f"] = 1;
  j["k"] = 3;
  j["delta"] = 1;
  j["value_length"] = 5;
  j["clients"] = Json::array({"w1", "w2", "w3", "r1"});
  j["ops"] = Json::array({
      Json{{"client", "w1"}, {"kind", "write"}, {"value", "one"}},
      Json{{"client", "w2"}, {"kind", "write"}, {"value", "two"},
           {"after", Json{{"respond", Json{{"client", "w1"}, {"op", 0}}}}}},
      Json{{"client", "w3"}, {"kind", "write"}, {"value", "tri"},
           {"after", Json{{"respond", Json{{"client", "w2"}, {"op", 0}}}}}},
      Json{{"client", "r1"}, {"kind", "read"},
           {"after", Json{{"respond", Json{{"client", "w3"}, {"op", 0}}}}}},
  });
  j["scheduler"] = Json{{"mode", "fair_round_robin"}};

  ExecutionTrace t = run_config(j.get<ScenarioConfig>());

  REQUIRE(check_structure(t).ok);
  REQUIRE(t.stalled_ops.empty());

  const Event* read_done = respond_event(t, {"r1", 0});
  REQUIRE(read_done != nullptr);
  REQUIRE(read_done->detail.at("value") == to_hex(Bytes{'t', 'r', 'i', 0, 0}));
  REQUIRE(read_done->detail.at("tag").get<Tag>() == Tag{3, "w3"});

  // Four finalized tags, but each server retains elements for two of them.
  REQUIRE(t.events.back().storage == Rational(10, 3));

  bool collected_initial = false;
  for (const auto& e : t.events)
    for (const auto& tag : e.effects.payload_removed)
      if (tag == kInitialTag) collected_initial = true;
  REQUIRE(collected_initial);
}

TEST_CASE("end points follow quorum finalization for writes") {
  Json j;
  j["id"] = "endpoints";
  j["protocol"] = "cas";
  j["n"] = 5;
  j["f"] = 1;
  j["k"] = 3;
  j["value_length"] = 5;
  j["clients"] = Json::array({"w1", "r1"});
  j["ops"] = Json::array({
      Json{{"client", "w1"}, {"kind", "write"}, {"value", "alpha"}},
      Json{{"client", "r1"}, {"kind", "read"},
           {"after", Json{{"respond", Json{{"client", "w1"}, {"op", 0}}}}}},
  });
  j["scheduler"] = Json{{"mode", "fair_round_robin"}};

  ExecutionTrace t = run_config(j.get<ScenarioConfig>());
  EndPointIndex index(t);

  const OperationId w{"w1", 0};
  const OperationId r{"r1", 0};

  // The write ends when a quorum holds its tag finalized, which cannot be
  // later than the client-visible response.
  auto w_end = index.end_point(w);
  REQUIRE(w_end.has_value());
  REQUIRE(*w_end <= respond_event(t, w)->seq);

  REQUIRE(index.end_point(r) == respond_event(t, r)->seq);
  REQUIRE_FALSE(index.concurrent(w, r));
  REQUIRE(*index.invoke_point(r) > *w_end);
}

TEST_CASE("a crashed writer still gets an end point once gossip finishes") {
  Json j;
  j["id"] = "endpoints-crash";
  j["protocol"] = "cas";
  j["n"] = 5;
  j["f"] = 1;
  j["k"] = 3;
  j["value_length"] = 5;
  j["clients"] = Json::array({"w1", "r1"});
  j["ops"] = Json::array({
      Json{{"client", "w1"}, {"kind", "write"}, {"value", "alpha"}},
      Json{{"client", "r1"}, {"kind", "read"}, {"after", Json{{"seq", 4000}}}},
  });
  j["failures"] = Json{{"clients", Json::array({Json{
      {"node", "w1"},
      {"when", Json{{"deliver", Json{{"kind", "finalize_write"}, {"to", "s1"}}},
                    {"count", 1}}}}})}};
  j["scheduler"] = Json{{"mode", "fair_round_robin"}};

  ExecutionTrace t = run_config(j.get<ScenarioConfig>());
  EndPointIndex index(t);

  const OperationId w{"w1", 0};
  const OperationId r{"r1", 0};
  REQUIRE(respond_event(t, w) == nullptr);

  // Gossip finalizes the tag at a quorum even though the writer died, so the
  // write has an end point and precedes the forced late read.
  REQUIRE(index.end_point(w).has_value());
  REQUIRE(index.end_point(r).has_value());
  REQUIRE_FALSE(index.concurrent(w, r));
}
