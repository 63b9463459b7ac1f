#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "casim/scenario.hpp"

using namespace casim;

namespace {

Json minimal_cas() {
  return Json{
      {"id", "t"},
      {"protocol", "cas"},
      {"n", 5},
      {"f", 1},
      {"k", 3},
      {"value_length", 8},
      {"clients", Json::array({"w1"})},
      {"ops", Json::array({Json{{"client", "w1"}, {"kind", "write"}, {"value", "hi"}}})},
  };
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
  const auto cfg = parse_scenario(minimal_cas());
  CHECK(cfg.id == "t");
  CHECK(cfg.protocol == Protocol::cas);
  CHECK(cfg.n == 5);
  CHECK(cfg.codec_k() == 3);
  CHECK(cfg.quorum_threshold() == 4);
  CHECK(cfg.step_budget == 1000000);
  CHECK(cfg.scheduler.mode == SchedulerMode::seeded_random);
  REQUIRE(cfg.ops.size() == 1);
  CHECK(cfg.ops[0].start.type == Condition::Type::always);
  // ASCII values are zero-padded out to value_length.
  CHECK(cfg.ops[0].value == Bytes{'h', 'i', 0, 0, 0, 0, 0, 0});
}

TEST_CASE("k defaults to n minus 2f for coded protocols") {
  auto j = minimal_cas();
  j.erase("k");
  CHECK(parse_scenario(j).codec_k() == 3);

  j["n"] = 9;
  j["f"] = 2;
  CHECK(parse_scenario(j).codec_k() == 5);
}

TEST_CASE("server ids are derived from the counts") {
  const auto cfg = parse_scenario(minimal_cas());
  CHECK(cfg.server_ids() == std::vector<std::string>{"s1", "s2", "s3", "s4", "s5"});

  Json j{{"id", "l"},
         {"protocol", "ldr"},
         {"f", 1},
         {"directory_count", 2},
         {"replica_count", 3},
         {"value_length", 4},
         {"clients", Json::array({"c1"})},
         {"ops", Json::array()}};
  const auto ldr = parse_scenario(j);
  CHECK(ldr.server_ids() ==
        std::vector<std::string>{"dir1", "dir2", "rep1", "rep2", "rep3"});
  CHECK(ldr.directory_ids() == std::vector<std::string>{"dir1", "dir2"});
}

TEST_CASE("condition forms parse from json") {
  CHECK(Json(nullptr).get<Condition>().type == Condition::Type::always);
  CHECK(Json(17).get<Condition>().type == Condition::Type::at_seq);
  CHECK(Json(17).get<Condition>().seq == 17);
  CHECK(Json{{"seq", 9}}.get<Condition>().seq == 9);
  CHECK(Json("quiescent").get<Condition>().type == Condition::Type::quiescent);
  CHECK(Json("never").get<Condition>().type == Condition::Type::never);

  const auto responded =
      Json{{"respond", Json{{"client", "w1"}, {"op", 2}}}}.get<Condition>();
  CHECK(responded.type == Condition::Type::responded);
  CHECK(responded.client == "w1");
  CHECK(responded.op_index == 2);

  const auto delivered =
      Json{{"deliver", Json{{"kind", "put"}, {"from", "w1"}, {"to", "s1"}}},
           {"count", 2}}
          .get<Condition>();
  CHECK(delivered.type == Condition::Type::delivered);
  CHECK(delivered.count == 2);
  CHECK(delivered.match.kind == MessageKind::put);

  const auto conj = Json{{"all", Json::array({Json(nullptr), Json(3)})}}.get<Condition>();
  CHECK(conj.type == Condition::Type::all_of);
  REQUIRE(conj.children.size() == 2);
  CHECK(conj.children[0].type == Condition::Type::always);
  CHECK(conj.children[1].type == Condition::Type::at_seq);

  CHECK_THROWS_AS(Json("sometime").get<Condition>(), ConfigError);
  const Json bad_key{{"when", 1}};
  CHECK_THROWS_AS(bad_key.get<Condition>(), ConfigError);
}

TEST_CASE("config round-trips through json") {
  auto j = minimal_cas();
  j["failures"] = Json{{"servers", Json::array({Json{{"node", "s2"}, {"when", 12}}})}};
  j["scheduler"] =
      Json{{"mode", "fair_round_robin"},
           {"seed", 7},
           {"script",
            Json{{"holds", Json::array({Json{
                               {"match", Json{{"kind", "pre_write"}, {"to", "s5"}}},
                               {"until", "never"}}})}}}};
  const auto cfg = parse_scenario(j);
  const Json back = cfg;
  const auto cfg2 = parse_scenario(back);
  CHECK(Json(cfg2) == back);
  CHECK(cfg2.scheduler.holds.size() == 1);
  CHECK(cfg2.scheduler.holds[0].until.type == Condition::Type::never);
  CHECK(cfg2.failures.server_crashes.size() == 1);
  CHECK(cfg2.failures.server_crashes[0].first == "s2");
}

TEST_CASE("validation rejects bad k with the quorum bound named") {
  auto j = minimal_cas();
  j["k"] = 4;  // n - 2f = 3 is the ceiling
  try {
    parse_scenario(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("k must satisfy 1 <= k <= n - 2f") != std::string::npos);
    CHECK(msg.find("k=4") != std::string::npos);
  }

  j["k"] = 0;
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
}

TEST_CASE("validation rejects ccoas configs that supply k") {
  Json j{{"id", "c"},
         {"protocol", "ccoas"},
         {"n", 5},
         {"f", 1},
         {"k", 4},
         {"value_length", 4},
         {"clients", Json::array({"r1"})},
         {"ops", Json::array({Json{{"client", "r1"}, {"kind", "read"}}})}};
  try {
    parse_scenario(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ccoas derives k = n - f") != std::string::npos);
  }
  j.erase("k");
  CHECK(parse_scenario(j).codec_k() == 4);
}

TEST_CASE("validation rejects structural mistakes") {
  auto bad = minimal_cas();
  bad["n"] = 2;  // n must exceed 2f
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["clients"] = Json::array({"w1", "w1"});
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["clients"] = Json::array({"s1"});  // collides with a server id
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["ops"][0]["client"] = "ghost";
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["ops"][0]["value"] = "way-too-long-for-the-register";
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["ops"][0] = Json{{"client", "w1"}, {"kind", "read"}, {"value", "x"}};
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["failures"] = Json{{"servers", Json::array({Json{{"node", "s9"}, {"when", 1}}})}};
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);

  bad = minimal_cas();
  bad["delta"] = 1;  // delta is a casgc knob
  CHECK_THROWS_AS(parse_scenario(bad), ConfigError);
}

TEST_CASE("ldr validation ties counts together") {
  Json j{{"id", "l"},
         {"protocol", "ldr"},
         {"f", 2},
         {"directory_count", 3},
         {"replica_count", 4},  // needs 2f+1 = 5
         {"value_length", 4},
         {"clients", Json::array({"c1"})},
         {"ops", Json::array()}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j["replica_count"] = 5;
  CHECK_NOTHROW(parse_scenario(j));
  j["n"] = 7;  // disagrees with 3 + 5
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j["n"] = 8;
  CHECK_NOTHROW(parse_scenario(j));
}

TEST_CASE("abd and ldr reject a supplied k") {
  Json j{{"id", "a"},
         {"protocol", "abd"},
         {"n", 5},
         {"f", 2},
         {"k", 2},
         {"value_length", 4},
         {"clients", Json::array({"c1"})},
         {"ops", Json::array()}};
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);
  j.erase("k");
  CHECK(parse_scenario(j).codec_k() == 1);
}
