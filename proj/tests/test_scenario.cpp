#include <catch2/catch_amalgamated.hpp>

#include "mcast/scenario_io.hpp"

using namespace mcast;

namespace {

// Minimal valid scenario; individual tests mutate the JSON before parsing.
ordered_json base_json() {
  return ordered_json::parse(R"({
    "name": "mini",
    "seed": 5,
    "duration_s": 10.0,
    "topology": {
      "server": "S",
      "nodes": ["S", "A"],
      "links": [{"src": "S", "dst": "A", "capacity_bps": 100e6}]
    },
    "assets": [{"id": "clip", "duration_s": 5.0, "segment_s": 1.0,
                "ladder": [{"bitrate_bps": 1e6, "quality": 0.5},
                           {"bitrate_bps": 2e6, "quality": 0.9}]}],
    "groups": [{"id": "g1", "asset": "clip"}],
    "schedule": [{"t": 0.0, "event": "join", "client": "c1", "group": "g1", "node": "A"}]
  })");
}

} // namespace

TEST_CASE("minimal scenario parses with defaults applied") {
  Scenario s = parse_scenario_text(base_json().dump());
  CHECK(s.name == "mini");
  CHECK(s.demand == "custom");
  CHECK(s.tick_s == 0.1);
  CHECK(s.epoch_s == 1.0);
  CHECK(s.method == Method::proposed);
  CHECK(s.optimizer == OptimizerKind::greedy);
  CHECK(s.links[0].id == "S->A");
  CHECK(s.params.headroom == 0.95);
}

TEST_CASE("malformed JSON reports line and column") {
  try {
    parse_scenario_text("{\n  \"name\": oops\n}", "bad.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad.json:2:") != std::string::npos);
  }
}

TEST_CASE("unknown fields are rejected, not absorbed") {
  ordered_json j = base_json();
  j["topology"]["links"][0].erase("capacity_bps");
  j["topology"]["links"][0]["capicity_bps"] = 1e6; // typo
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ParseError);

  ordered_json top = base_json();
  top["surprise"] = 1;
  CHECK_THROWS_AS(parse_scenario_text(top.dump()), ParseError);
}

TEST_CASE("a missing seed is a configuration error") {
  ordered_json j = base_json();
  j.erase("seed");
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ConfigError);
}

TEST_CASE("validate rejects epoch not aligned to ticks") {
  ordered_json j = base_json();
  j["tick_s"] = 0.3;
  j["epoch_s"] = 1.0;
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ConfigError);
}

TEST_CASE("validate rejects schedule events outside the run") {
  ordered_json j = base_json();
  j["schedule"].push_back(
      {{"t", 99.0}, {"event", "join"}, {"client", "c2"}, {"group", "g1"}, {"node", "A"}});
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ConfigError);
}

TEST_CASE("validate rejects events for unknown groups") {
  ordered_json j = base_json();
  j["schedule"][0]["group"] = "nope";
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ConfigError);
}

TEST_CASE("validate rejects clients attached to unreachable nodes") {
  ordered_json j = base_json();
  j["topology"]["nodes"].push_back("B"); // no link to B
  j["schedule"][0]["node"] = "B";
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ConfigError);
}

TEST_CASE("validate rejects a buffer cap below the startup threshold") {
  ordered_json j = base_json();
  j["params"] = {{"buffer_cap_s", 0.5}};
  CHECK_THROWS_AS(parse_scenario_text(j.dump()), ConfigError);
}

TEST_CASE("effective configuration echo round-trips") {
  ordered_json j = base_json();
  j["method"] = "traditional";
  j["optimizer"] = "sa";
  j["params"] = {{"safety", 0.7}, {"goodput_window", 8}};
  j["qoe"] = {{"w_rebuffer", 3.0}};
  Scenario s = parse_scenario_text(j.dump());

  const ordered_json echo = scenario_to_json(s);
  Scenario reparsed = parse_scenario_text(echo.dump());
  CHECK(scenario_to_json(reparsed) == echo);
  CHECK(reparsed.method == Method::traditional);
  CHECK(reparsed.optimizer == OptimizerKind::sa);
  CHECK(reparsed.params.safety == 0.7);
  CHECK(reparsed.qoe.w_rebuffer == 3.0);
}

TEST_CASE("bundled presets parse and carry their demand labels") {
  Scenario low = parse_scenario(std::string(MCAST_SCENARIO_DIR) + "/low_demand.json");
  CHECK(low.demand == "low");
  Scenario high = parse_scenario(std::string(MCAST_SCENARIO_DIR) + "/high_demand.json");
  CHECK(high.demand == "high");
  CHECK(high.schedule.size() > low.schedule.size());
}
