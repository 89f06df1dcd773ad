#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcast/content.hpp"
#include "mcast/errors.hpp"
#include "mcast/rng.hpp"
#include "mcast/types.hpp"

namespace mcast {

/// Two-state multiplicative capacity modulation (Gilbert-style): the link
/// alternates between a good and a bad state, scaling nominal capacity.
struct LinkVariability {
  double good_multiplier = 1.0;
  double bad_multiplier = 1.0;
  double p_good_to_bad = 0.0; // transition probability per tick
  double p_bad_to_good = 0.0;
};

struct Link {
  LinkId id;
  NodeId src;
  NodeId dst;
  double capacity_bps = 0;
  double latency_ms = 0;
  double base_loss = 0; // residual loss probability in [0, 1)
  std::optional<LinkVariability> variability;
};

struct Topology {
  std::vector<NodeId> nodes;
  std::vector<Link> links;
  NodeId server_node;

  const Link& link(const LinkId& id) const {
    for (const Link& l : links)
      if (l.id == id) return l;
    throw StateError("unknown link: " + id);
  }

  // Outgoing link indexes per node, in deterministic order.
  std::map<NodeId, std::vector<std::size_t>> adjacency() const {
    std::map<NodeId, std::vector<std::size_t>> adj;
    for (std::size_t i = 0; i < links.size(); ++i)
      adj[links[i].src].push_back(i);
    return adj;
  }
};

namespace detail {

inline std::set<NodeId> reachable_from(const Topology& topo, const NodeId& start) {
  auto adj = topo.adjacency();
  std::set<NodeId> seen{start};
  std::vector<NodeId> frontier{start};
  while (!frontier.empty()) {
    NodeId n = frontier.back();
    frontier.pop_back();
    auto it = adj.find(n);
    if (it == adj.end()) continue;
    for (std::size_t li : it->second) {
      const NodeId& next = topo.links[li].dst;
      if (seen.insert(next).second) frontier.push_back(next);
    }
  }
  return seen;
}

} // namespace detail

/// Validates a topology description. client_nodes, when given, must all be
/// reachable from the server node.
inline Topology build_topology(std::vector<NodeId> nodes, std::vector<Link> links,
                               NodeId server_node,
                               const std::set<NodeId>& client_nodes = {}) {
  std::set<NodeId> node_set(nodes.begin(), nodes.end());
  if (node_set.size() != nodes.size()) throw ConfigError("duplicate node id");
  if (!node_set.count(server_node))
    throw ConfigError("server node " + server_node + " not in node list");

  std::set<std::pair<NodeId, NodeId>> pairs;
  std::set<LinkId> ids;
  for (Link& l : links) {
    if (l.id.empty()) l.id = l.src + "->" + l.dst;
    if (!node_set.count(l.src)) throw ConfigError("link " + l.id + ": unknown src node");
    if (!node_set.count(l.dst)) throw ConfigError("link " + l.id + ": unknown dst node");
    if (l.src == l.dst) throw ConfigError("link " + l.id + ": self-loop");
    if (!pairs.insert({l.src, l.dst}).second)
      throw ConfigError("duplicate link " + l.src + "->" + l.dst);
    if (!ids.insert(l.id).second) throw ConfigError("duplicate link id " + l.id);
    if (!(l.capacity_bps > 0)) throw ConfigError("link " + l.id + ": capacity must be > 0");
    if (l.latency_ms < 0) throw ConfigError("link " + l.id + ": latency must be >= 0");
    if (l.base_loss < 0 || l.base_loss >= 1)
      throw ConfigError("link " + l.id + ": base_loss must be in [0, 1)");
    if (l.variability) {
      const LinkVariability& v = *l.variability;
      if (!(v.good_multiplier > 0) || v.good_multiplier > 1 ||
          !(v.bad_multiplier > 0) || v.bad_multiplier > 1)
        throw ConfigError("link " + l.id + ": multipliers must be in (0, 1]");
      if (v.good_multiplier < v.bad_multiplier)
        throw ConfigError("link " + l.id + ": good multiplier must be >= bad multiplier");
      if (v.p_good_to_bad < 0 || v.p_good_to_bad > 1 || v.p_bad_to_good < 0 ||
          v.p_bad_to_good > 1)
        throw ConfigError("link " + l.id + ": transition probabilities must be in [0, 1]");
    }
  }

  Topology topo{std::move(nodes), std::move(links), std::move(server_node)};
  if (!client_nodes.empty()) {
    std::set<NodeId> reach = detail::reachable_from(topo, topo.server_node);
    for (const NodeId& n : client_nodes) {
      if (!node_set.count(n)) throw ConfigError("client node " + n + " not in topology");
      if (!reach.count(n))
        throw ConfigError("client node " + n + " unreachable from server");
    }
  }
  return topo;
}

/// Delivery tree for one group: the union of root-to-member paths. Each link
/// appears once regardless of how many members sit behind it.
struct MulticastTree {
  GroupId group_id;
  std::set<LinkId> links;
  // Path (ordered link ids, server to node) per member attachment node.
  std::map<NodeId, std::vector<LinkId>> member_paths;
};

/// Minimum-latency path tree from the server to every member node. Ties are
/// broken by hop count, then by the lexicographic node-id sequence of the
/// path, so the result is deterministic for a fixed topology.
inline MulticastTree shortest_path_tree(const Topology& topo, const GroupId& group_id,
                                        const std::set<NodeId>& members) {
  struct PathInfo {
    double latency_ms = 0;
    std::vector<NodeId> node_seq; // from server, inclusive
    std::vector<LinkId> link_seq;
  };
  auto better = [](const PathInfo& a, const PathInfo& b) {
    if (a.latency_ms != b.latency_ms) return a.latency_ms < b.latency_ms;
    if (a.link_seq.size() != b.link_seq.size()) return a.link_seq.size() < b.link_seq.size();
    return a.node_seq < b.node_seq;
  };

  auto adj = topo.adjacency();
  std::map<NodeId, PathInfo> best;
  best[topo.server_node] = PathInfo{0.0, {topo.server_node}, {}};
  std::set<NodeId> done;

  while (true) {
    // Smallest unfinished node under the full tie-break ordering.
    const NodeId* next = nullptr;
    for (const auto& [node, info] : best) {
      if (done.count(node)) continue;
      if (!next || better(info, best.at(*next))) next = &node;
    }
    if (!next) break;
    NodeId u = *next;
    done.insert(u);
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    for (std::size_t li : it->second) {
      const Link& l = topo.links[li];
      PathInfo cand = best.at(u);
      cand.latency_ms += l.latency_ms;
      cand.node_seq.push_back(l.dst);
      cand.link_seq.push_back(l.id);
      auto [pos, inserted] = best.try_emplace(l.dst, cand);
      if (!inserted && better(cand, pos->second)) pos->second = cand;
    }
  }

  MulticastTree tree{group_id, {}, {}};
  for (const NodeId& m : members) {
    if (m == topo.server_node) {
      tree.member_paths[m] = {};
      continue;
    }
    auto it = best.find(m);
    if (it == best.end())
      throw RoutingError("member node " + m + " unreachable from server");
    tree.member_paths[m] = it->second.link_seq;
    tree.links.insert(it->second.link_seq.begin(), it->second.link_seq.end());
  }
  return tree;
}

/// Inputs to per-link load accounting for one group.
struct GroupLoadInput {
  const MulticastTree* tree = nullptr;
  const BitrateLadder* ladder = nullptr;
  int tier = 0;
  double fec_fraction = 0;
};

/// Offered load per link: each group contributes bitrate*(1+fec) once on
/// every tree link, independent of how many members sit downstream.
inline std::map<LinkId, double> link_load(const std::map<GroupId, GroupLoadInput>& groups) {
  std::map<LinkId, double> load;
  for (const auto& [gid, in] : groups) {
    if (!in.tree || !in.ladder) throw StateError("group " + gid + ": missing tree or ladder");
    const double rate = in.ladder->tier(in.tier).bitrate_bps * (1.0 + in.fec_fraction);
    for (const LinkId& l : in.tree->links) load[l] += rate;
  }
  return load;
}

/// Convenience overload matching the (trees, plan, ladders, fec) shape.
inline std::map<LinkId, double> link_load(
    const std::map<GroupId, MulticastTree>& trees, const std::map<GroupId, int>& plan,
    const std::map<GroupId, const BitrateLadder*>& ladders,
    const std::map<GroupId, double>& fec) {
  std::map<GroupId, GroupLoadInput> inputs;
  for (const auto& [gid, tier] : plan) {
    auto t = trees.find(gid);
    auto l = ladders.find(gid);
    if (t == trees.end() || l == ladders.end())
      throw StateError("plan references unknown group " + gid);
    auto f = fec.find(gid);
    inputs[gid] = GroupLoadInput{&t->second, l->second, tier,
                                 f == fec.end() ? 0.0 : f->second};
  }
  for (const auto& [gid, tree] : trees)
    if (!plan.count(gid)) throw StateError("plan missing group " + gid);
  return link_load(inputs);
}

/// Per-link good/bad state, advanced once per tick by the engine.
class CapacityProcess {
public:
  explicit CapacityProcess(const Topology& topo) : topo_(&topo) {
    for (const Link& l : topo.links)
      if (l.variability) good_[l.id] = true;
  }

  /// Advances every variable link's state and returns effective capacity for
  /// all links. Draws one uniform per variable link, in link order, so the
  /// consumed stream length is fixed per tick.
  std::map<LinkId, double> step(Rng& rng) {
    std::map<LinkId, double> effective;
    for (const Link& l : topo_->links) {
      if (!l.variability) {
        effective[l.id] = l.capacity_bps;
        continue;
      }
      const LinkVariability& v = *l.variability;
      bool& good = good_.at(l.id);
      const double u = rng.uniform01();
      if (good && u < v.p_good_to_bad) good = false;
      else if (!good && u < v.p_bad_to_good) good = true;
      effective[l.id] = l.capacity_bps * (good ? v.good_multiplier : v.bad_multiplier);
    }
    return effective;
  }

  /// Effective capacity without advancing state.
  std::map<LinkId, double> current() const {
    std::map<LinkId, double> effective;
    for (const Link& l : topo_->links) {
      if (!l.variability) {
        effective[l.id] = l.capacity_bps;
        continue;
      }
      const LinkVariability& v = *l.variability;
      effective[l.id] =
          l.capacity_bps * (good_.at(l.id) ? v.good_multiplier : v.bad_multiplier);
    }
    return effective;
  }

  bool in_good_state(const LinkId& id) const {
    auto it = good_.find(id);
    return it == good_.end() ? true : it->second;
  }

private:
  const Topology* topo_;
  std::map<LinkId, bool> good_;
};

} // namespace mcast
