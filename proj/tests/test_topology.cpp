#include <catch2/catch_amalgamated.hpp>

#include "mcast/topology.hpp"

using namespace mcast;

namespace {

Link mk(const NodeId& src, const NodeId& dst, double cap, double latency = 1.0) {
  Link l;
  l.src = src;
  l.dst = dst;
  l.capacity_bps = cap;
  l.latency_ms = latency;
  return l;
}

Topology line_abc() {
  return build_topology({"A", "B", "C"}, {mk("A", "B", 10e6), mk("B", "C", 10e6)}, "A");
}

} // namespace

TEST_CASE("build_topology validates a line graph") {
  Topology t = line_abc();
  REQUIRE(t.links.size() == 2);
  CHECK(t.links[0].id == "A->B");
  CHECK(t.link("B->C").capacity_bps == 10e6);
}

TEST_CASE("build_topology rejects invalid input") {
  CHECK_THROWS_AS(build_topology({"A", "B"}, {mk("A", "B", 0.0)}, "A"), ConfigError);
  CHECK_THROWS_AS(build_topology({"A", "B"}, {mk("A", "B", 1e6), mk("A", "B", 2e6)}, "A"),
                  ConfigError);
  CHECK_THROWS_AS(build_topology({"A"}, {mk("A", "A", 1e6)}, "A"), ConfigError);
  CHECK_THROWS_AS(build_topology({"A", "B"}, {mk("A", "B", 1e6)}, "X"), ConfigError);
  // client node unreachable from server
  CHECK_THROWS_AS(
      build_topology({"A", "B", "C"}, {mk("A", "B", 1e6)}, "A", std::set<NodeId>{"C"}),
      ConfigError);
  // reachable client nodes are fine
  CHECK_NOTHROW(
      build_topology({"A", "B", "C"}, {mk("A", "B", 1e6), mk("B", "C", 1e6)}, "A",
                     std::set<NodeId>{"C"}));
}

TEST_CASE("shortest_path_tree on a line picks the only path") {
  Topology t = line_abc();
  MulticastTree tree = shortest_path_tree(t, "g", {"C"});
  CHECK(tree.links == std::set<LinkId>{"A->B", "B->C"});
  CHECK(tree.member_paths.at("C") == std::vector<LinkId>{"A->B", "B->C"});
}

TEST_CASE("shortest_path_tree on a star uses both hub edges") {
  Topology t = build_topology({"S", "L1", "L2"}, {mk("S", "L1", 1e6), mk("S", "L2", 1e6)},
                              "S");
  MulticastTree tree = shortest_path_tree(t, "g", {"L1", "L2"});
  CHECK(tree.links == std::set<LinkId>{"S->L1", "S->L2"});
}

TEST_CASE("shortest_path_tree picks the lower-latency diamond branch") {
  // A->B->D costs 3+3 ms, A->C->D costs 2+2 ms; enumerate both by hand.
  Topology t = build_topology({"A", "B", "C", "D"},
                              {mk("A", "B", 1e6, 3.0), mk("B", "D", 1e6, 3.0),
                               mk("A", "C", 1e6, 2.0), mk("C", "D", 1e6, 2.0)},
                              "A");
  MulticastTree tree = shortest_path_tree(t, "g", {"D"});
  CHECK(tree.links == std::set<LinkId>{"A->C", "C->D"});
}

TEST_CASE("shortest_path_tree breaks latency ties by hops then node ids") {
  // Two equal-latency routes to D: A->B->D (4ms, 2 hops) vs A->D (4ms, 1 hop).
  Topology fewer_hops = build_topology(
      {"A", "B", "D"}, {mk("A", "B", 1e6, 2.0), mk("B", "D", 1e6, 2.0), mk("A", "D", 1e6, 4.0)},
      "A");
  CHECK(shortest_path_tree(fewer_hops, "g", {"D"}).links == std::set<LinkId>{"A->D"});

  // Same latency, same hops through B or C: lexicographic node id wins.
  Topology lex = build_topology({"A", "B", "C", "D"},
                                {mk("A", "C", 1e6, 2.0), mk("C", "D", 1e6, 2.0),
                                 mk("A", "B", 1e6, 2.0), mk("B", "D", 1e6, 2.0)},
                                "A");
  CHECK(shortest_path_tree(lex, "g", {"D"}).links == std::set<LinkId>{"A->B", "B->D"});
}

TEST_CASE("shortest_path_tree rejects unreachable members") {
  Topology t = build_topology({"A", "B", "C"}, {mk("A", "B", 1e6)}, "A");
  CHECK_THROWS_AS(shortest_path_tree(t, "g", {"C"}), RoutingError);
}

TEST_CASE("tree minimality: removing any tree link disconnects a member") {
  Topology t = build_topology({"S", "C1", "E1", "E2"},
                              {mk("S", "C1", 1e8), mk("C1", "E1", 1e7), mk("C1", "E2", 1e7)},
                              "S");
  MulticastTree tree = shortest_path_tree(t, "g", {"E1", "E2"});
  for (const LinkId& removed : tree.links) {
    bool disconnects = false;
    for (const auto& [node, path] : tree.member_paths)
      for (const LinkId& l : path)
        if (l == removed) disconnects = true;
    CHECK(disconnects);
  }
}

TEST_CASE("link_load counts each group once per link regardless of members") {
  Topology t = line_abc();
  BitrateLadder ladder = validate_ladder({{2e6, 0.5}});
  MulticastTree tree = shortest_path_tree(t, "g", {"C"});

  std::map<GroupId, GroupLoadInput> one;
  one["g"] = {&tree, &ladder, 0, 0.0};
  auto loads = link_load(one);
  CHECK(loads.at("A->B") == 2e6);
  CHECK(loads.at("B->C") == 2e6);
}

TEST_CASE("link_load adds concurrent groups sharing a link") {
  Topology t = line_abc();
  BitrateLadder l1 = validate_ladder({{2e6, 0.5}});
  BitrateLadder l2 = validate_ladder({{3e6, 0.5}});
  MulticastTree tree1 = shortest_path_tree(t, "g1", {"B"});
  MulticastTree tree2 = shortest_path_tree(t, "g2", {"B"});

  std::map<GroupId, GroupLoadInput> groups;
  groups["g1"] = {&tree1, &l1, 0, 0.0};
  groups["g2"] = {&tree2, &l2, 0, 0.0};
  CHECK(link_load(groups).at("A->B") == 5e6);
}

TEST_CASE("link_load of an empty plan is all zeros") {
  CHECK(link_load({}).empty());
}

TEST_CASE("link_load map overload rejects unknown groups") {
  Topology t = line_abc();
  BitrateLadder ladder = validate_ladder({{2e6, 0.5}});
  std::map<GroupId, MulticastTree> trees;
  trees["g"] = shortest_path_tree(t, "g", {"C"});
  std::map<GroupId, const BitrateLadder*> ladders{{"g", &ladder}};

  CHECK_THROWS_AS(link_load(trees, {{"zz", 0}}, ladders, {}), StateError);
  CHECK_THROWS_AS(link_load(trees, {}, ladders, {}), StateError); // tree not covered
}

TEST_CASE("multicast saving: load independent of member count behind shared links") {
  Topology t = line_abc();
  BitrateLadder ladder = validate_ladder({{2e6, 0.5}});
  MulticastTree tree = shortest_path_tree(t, "g", {"C"});

  std::map<GroupId, GroupLoadInput> groups{{"g", {&tree, &ladder, 0, 0.1}}};
  auto base = link_load(groups);
  // The tree (and so the load) depends on attachment nodes, not member count.
  MulticastTree tree_many = shortest_path_tree(t, "g", {"C"}); // 100 members, one node
  std::map<GroupId, GroupLoadInput> many{{"g", {&tree_many, &ladder, 0, 0.1}}};
  CHECK(link_load(many) == base);
}

TEST_CASE("step_capacity returns nominal for invariable links") {
  Topology t = line_abc();
  CapacityProcess proc(t);
  Rng rng(42);
  for (int i = 0; i < 5; ++i) {
    auto caps = proc.step(rng);
    CHECK(caps.at("A->B") == 10e6);
    CHECK(caps.at("B->C") == 10e6);
  }
}

TEST_CASE("step_capacity with equal multipliers is constant") {
  Link l = mk("A", "B", 10e6);
  l.variability = LinkVariability{1.0, 1.0, 0.3, 0.3};
  Topology t = build_topology({"A", "B"}, {l}, "A");
  CapacityProcess proc(t);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(proc.step(rng).at("A->B") == 10e6);
}

TEST_CASE("step_capacity long-run bad fraction matches the stationary law") {
  // p(g->b)=0.1, p(b->g)=0.5: stationary bad fraction 0.1/(0.1+0.5) = 1/6.
  Link l = mk("A", "B", 12e6);
  l.variability = LinkVariability{1.0, 0.5, 0.1, 0.5};
  Topology t = build_topology({"A", "B"}, {l}, "A");
  CapacityProcess proc(t);
  Rng rng(7);
  int bad = 0;
  const int ticks = 1000;
  for (int i = 0; i < ticks; ++i)
    if (proc.step(rng).at("A->B") == 6e6) ++bad;
  const double fraction = static_cast<double>(bad) / ticks;
  CHECK(fraction == Catch::Approx(1.0 / 6.0).margin(0.03));
}

TEST_CASE("capacity traces are deterministic for a fixed seed") {
  Link l = mk("A", "B", 10e6);
  l.variability = LinkVariability{1.0, 0.4, 0.2, 0.4};
  Topology t = build_topology({"A", "B"}, {l}, "A");

  std::vector<double> first, second;
  {
    CapacityProcess proc(t);
    Rng rng(99);
    for (int i = 0; i < 200; ++i) first.push_back(proc.step(rng).at("A->B"));
  }
  {
    CapacityProcess proc(t);
    Rng rng(99);
    for (int i = 0; i < 200; ++i) second.push_back(proc.step(rng).at("A->B"));
  }
  CHECK(first == second);
}
