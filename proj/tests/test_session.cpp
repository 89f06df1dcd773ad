#include <catch2/catch_amalgamated.hpp>

#include "mcast/session.hpp"

using namespace mcast;

namespace {

Link mk(const NodeId& src, const NodeId& dst, double cap, double loss = 0.0) {
  Link l;
  l.src = src;
  l.dst = dst;
  l.capacity_bps = cap;
  l.latency_ms = 1.0;
  l.base_loss = loss;
  return l;
}

struct Fixture {
  Topology topo;
  VideoAsset asset;

  Fixture()
      : topo(build_topology({"S", "A", "B"}, {mk("S", "A", 100e6), mk("A", "B", 100e6)},
                            "S")) {
    asset.id = "clip";
    asset.duration_s = 15.0;
    asset.segment_s = 1.0;
    asset.ladder = validate_ladder({{1e6, 0.4}, {3e6, 0.7}, {5e6, 1.0}});
  }

  GroupState group() const {
    GroupState g;
    g.id = "g";
    g.asset = &asset;
    g.tree = MulticastTree{"g", {}, {}};
    return g;
  }
};

} // namespace

TEST_CASE("join activates a group and builds its tree") {
  Fixture f;
  GroupState g = f.group();
  REQUIRE_FALSE(g.active());
  join(g, "c1", "B", f.topo);
  CHECK(g.active());
  CHECK(g.tree.links == std::set<LinkId>{"S->A", "A->B"});
}

TEST_CASE("joining behind existing tree links leaves the tree unchanged") {
  Fixture f;
  GroupState g = f.group();
  join(g, "c1", "B", f.topo);
  auto before = g.tree.links;
  join(g, "c2", "B", f.topo);
  CHECK(g.tree.links == before);
}

TEST_CASE("duplicate join throws MembershipError") {
  Fixture f;
  GroupState g = f.group();
  join(g, "c1", "B", f.topo);
  CHECK_THROWS_AS(join(g, "c1", "B", f.topo), MembershipError);
}

TEST_CASE("leave recomputes or clears the tree") {
  Fixture f;
  GroupState g = f.group();
  join(g, "c1", "A", f.topo);
  join(g, "c2", "B", f.topo);
  REQUIRE(g.tree.links == std::set<LinkId>{"S->A", "A->B"});

  leave(g, "c2", f.topo);
  CHECK(g.tree.links == std::set<LinkId>{"S->A"});

  leave(g, "c1", f.topo);
  CHECK_FALSE(g.active());
  CHECK(g.tree.links.empty());
}

TEST_CASE("leaving one of two co-located members keeps the tree") {
  Fixture f;
  GroupState g = f.group();
  join(g, "c1", "B", f.topo);
  join(g, "c2", "B", f.topo);
  auto before = g.tree.links;
  leave(g, "c1", f.topo);
  CHECK(g.tree.links == before);
}

TEST_CASE("leave of an unknown member throws MembershipError") {
  Fixture f;
  GroupState g = f.group();
  join(g, "c1", "B", f.topo);
  CHECK_THROWS_AS(leave(g, "zz", f.topo), MembershipError);
}

TEST_CASE("deliver_tick under capacity with no loss delivers real time") {
  Fixture f;
  GroupState g = f.group();
  join(g, "c1", "B", f.topo);
  g.current_tier = 2; // 5 Mbps

  std::map<LinkId, double> caps{{"S->A", 100e6}, {"A->B", 100e6}};
  std::map<LinkId, double> loads{{"S->A", 5e6}, {"A->B", 5e6}};
  auto d = deliver_tick(g, f.topo, caps, loads, 0.1);
  CHECK(d.at("c1").delivered_s == Catch::Approx(0.1));
  CHECK(d.at("c1").goodput_bps == Catch::Approx(5e6));
  CHECK(d.at("c1").observed_loss == 0.0);
}

TEST_CASE("deliver_tick shares an oversubscribed link proportionally") {
  // Two equal-rate groups through one 5 Mbps link, each offering 5 Mbps.
  Topology topo = build_topology({"S", "A"}, {mk("S", "A", 5e6)}, "S");
  VideoAsset asset;
  asset.id = "v";
  asset.duration_s = 15.0;
  asset.segment_s = 1.0;
  asset.ladder = validate_ladder({{5e6, 1.0}});

  GroupState g1;
  g1.id = "g1";
  g1.asset = &asset;
  join(g1, "c1", "A", topo);

  std::map<LinkId, double> caps{{"S->A", 5e6}};
  std::map<LinkId, double> loads{{"S->A", 10e6}}; // both groups together
  auto d = deliver_tick(g1, topo, caps, loads, 1.0);
  CHECK(d.at("c1").delivered_s == Catch::Approx(0.5));
  CHECK(d.at("c1").goodput_bps == Catch::Approx(2.5e6));
}

TEST_CASE("deliver_tick FEC recovers loss up to the redundancy fraction") {
  Topology topo =
      build_topology({"S", "A"}, {mk("S", "A", 100e6, 0.05)}, "S"); // 5% link loss
  VideoAsset asset;
  asset.id = "v";
  asset.duration_s = 15.0;
  asset.segment_s = 1.0;
  asset.ladder = validate_ladder({{2e6, 1.0}});

  GroupState g;
  g.id = "g";
  g.asset = &asset;
  g.fec_fraction = 0.10;
  join(g, "c1", "A", topo);

  std::map<LinkId, double> caps{{"S->A", 100e6}};
  std::map<LinkId, double> loads{{"S->A", 2e6 * 1.10}};
  auto d = deliver_tick(g, topo, caps, loads, 1.0);
  CHECK(d.at("c1").delivered_s == Catch::Approx(1.0)); // fully recovered
  CHECK(d.at("c1").observed_loss == Catch::Approx(0.05));

  // Without redundancy the same loss cuts goodput one-for-one.
  g.fec_fraction = 0.0;
  loads["S->A"] = 2e6;
  auto d0 = deliver_tick(g, topo, caps, loads, 1.0);
  CHECK(d0.at("c1").delivered_s == Catch::Approx(0.95));
}

TEST_CASE("deliver_tick compounds loss along the member path") {
  Topology topo = build_topology(
      {"S", "A", "B"}, {mk("S", "A", 100e6, 0.1), mk("A", "B", 100e6, 0.1)}, "S");
  VideoAsset asset;
  asset.id = "v";
  asset.duration_s = 15.0;
  asset.segment_s = 1.0;
  asset.ladder = validate_ladder({{2e6, 1.0}});

  GroupState g;
  g.id = "g";
  g.asset = &asset;
  join(g, "c1", "B", topo);

  std::map<LinkId, double> caps{{"S->A", 100e6}, {"A->B", 100e6}};
  std::map<LinkId, double> loads{{"S->A", 2e6}, {"A->B", 2e6}};
  auto d = deliver_tick(g, topo, caps, loads, 1.0);
  CHECK(d.at("c1").observed_loss == Catch::Approx(1.0 - 0.9 * 0.9));
}

TEST_CASE("step_playback holds a steady buffer at balanced rates") {
  Fixture f;
  ClientState c;
  c.id = "c";
  c.buffer_s = 2.0;
  c.phase = Phase::playing;
  step_playback(c, f.asset, 1.0, 1.0, 1.0, 0.0, {});
  CHECK(c.buffer_s == Catch::Approx(2.0));
  CHECK(c.played_s == Catch::Approx(1.0));
  CHECK(c.rebuffer_s == 0.0);
}

TEST_CASE("step_playback drains then stalls when delivery stops") {
  Fixture f;
  ClientState c;
  c.id = "c";
  c.buffer_s = 0.5;
  c.phase = Phase::playing;
  step_playback(c, f.asset, 1.0, 0.0, 1.0, 0.0, {});
  CHECK(c.played_s == Catch::Approx(0.5));
  CHECK(c.rebuffer_s == Catch::Approx(0.5));
  CHECK(c.buffer_s == 0.0);
  CHECK(c.phase == Phase::rebuffering);
}

TEST_CASE("startup records the exact threshold-crossing time") {
  Fixture f;
  ClientState c;
  c.id = "c";
  c.join_time_s = 0.0;
  // Fill at 1.25 content-s per second: threshold 1.0 crossed at t = 0.8.
  for (int tick = 0; tick < 10; ++tick)
    step_playback(c, f.asset, 0.4, 0.125, 0.1, tick * 0.1, {});
  CHECK(c.started());
  CHECK(c.startup_delay_s == Catch::Approx(0.8).margin(1e-9));
}

TEST_CASE("startup delay is fixed once playback begins") {
  Fixture f;
  ClientState c;
  c.id = "c";
  c.join_time_s = 0.0;
  for (int tick = 0; tick < 30; ++tick)
    step_playback(c, f.asset, 0.4, 0.125, 0.1, tick * 0.1, {});
  const double d = c.startup_delay_s;
  for (int tick = 30; tick < 60; ++tick)
    step_playback(c, f.asset, 0.4, 0.125, 0.1, tick * 0.1, {});
  CHECK(c.startup_delay_s == d);
}

TEST_CASE("playback finishes when every segment has played") {
  Fixture f;
  ClientState c;
  c.id = "c";
  c.join_time_s = 0.0;
  for (int tick = 0; tick < 400 && c.phase != Phase::done; ++tick)
    step_playback(c, f.asset, 1.0, 0.1, 0.1, tick * 0.1, {});
  CHECK(c.phase == Phase::done);
  CHECK(c.played_s == f.asset.duration_s);
  CHECK(c.quality_trace.size() == 15);
}

TEST_CASE("conservation: played plus buffered never exceeds delivered") {
  Fixture f;
  ClientState c;
  c.id = "c";
  double delivered_sum = 0;
  Rng rng(5);
  for (int tick = 0; tick < 300; ++tick) {
    const double d = 0.15 * rng.uniform01();
    delivered_sum += d;
    step_playback(c, f.asset, 0.7, d, 0.1, tick * 0.1, {});
    CHECK(c.played_s + c.buffer_s <= delivered_sum + 1e-9);
    CHECK(c.buffer_s >= 0.0);
  }
}

TEST_CASE("stall and startup counters are monotone") {
  Fixture f;
  ClientState c;
  c.id = "c";
  Rng rng(11);
  double prev_rebuffer = 0, prev_startup = 0;
  for (int tick = 0; tick < 300; ++tick) {
    const double d = rng.uniform01() < 0.4 ? 0.0 : 0.12;
    step_playback(c, f.asset, 0.7, d, 0.1, tick * 0.1, {});
    CHECK(c.rebuffer_s >= prev_rebuffer);
    CHECK(c.startup_delay_s >= prev_startup);
    prev_rebuffer = c.rebuffer_s;
    prev_startup = c.startup_delay_s;
  }
}

TEST_CASE("ample delivery grows the buffer to its cap with no stalls") {
  Fixture f;
  ClientState c;
  c.id = "c";
  PlaybackParams p;
  p.buffer_cap_s = 4.0;
  // 3x real time: the cap is reached around t=1.8 and holds until the
  // asset runs out of content near the end of the watch.
  for (int tick = 0; tick < 60; ++tick) {
    step_playback(c, f.asset, 1.0, 0.3, 0.1, tick * 0.1, p);
    CHECK(c.buffer_s <= 4.0 + 1e-9);
  }
  CHECK(c.rebuffer_s == 0.0);
  // Fill is clamped at the cap before playback drains the tick, so the
  // steady state sits within one tick of the cap.
  CHECK(c.buffer_s == Catch::Approx(4.0).margin(0.1 + 1e-9));
  CHECK(c.buffer_s >= 3.9 - 1e-9);
}

TEST_CASE("feedback reports window means and flags cold start") {
  ClientState c;
  c.id = "c";
  c.buffer_s = 3.2;
  c.current_quality = 0.7;

  FeedbackReport cold = feedback(c);
  CHECK(cold.cold_start);
  CHECK(cold.goodput_bps == 0.0);
  CHECK(cold.buffer_s == Catch::Approx(3.2));

  c.throughput_samples = {4e6, 4e6, 4e6};
  c.loss_samples = {0.02, 0.04};
  FeedbackReport r = feedback(c);
  CHECK_FALSE(r.cold_start);
  CHECK(r.goodput_bps == Catch::Approx(4e6));
  CHECK(r.loss == Catch::Approx(0.03));
  CHECK(r.quality == Catch::Approx(0.7));
}
