#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcast/allocator.hpp"
#include "mcast/content.hpp"
#include "mcast/errors.hpp"
#include "mcast/metrics.hpp"
#include "mcast/topology.hpp"
#include "mcast/types.hpp"

namespace mcast {

enum class Method { traditional, proposed };
enum class OptimizerKind { greedy, ga, sa };

inline const char* to_string(Method m) {
  return m == Method::traditional ? "traditional" : "proposed";
}

inline const char* to_string(OptimizerKind o) {
  switch (o) {
    case OptimizerKind::greedy: return "greedy";
    case OptimizerKind::ga: return "ga";
    case OptimizerKind::sa: return "sa";
  }
  return "?";
}

struct ScheduleEvent {
  enum class Kind { join, leave } kind = Kind::join;
  double t = 0;
  ClientId client;
  GroupId group;
  NodeId node; // join only
};

struct GroupDef {
  GroupId id;
  AssetId asset;
};

/// Knobs of the session/adaptation machinery; scenario-overridable.
struct SessionParams {
  double startup_threshold_s = 1.0;
  double resume_threshold_s = 1.0;
  double buffer_cap_s = 10.0;
  double low_water_s = 1.0;
  double safety = 0.8;
  double alpha = 0.3; // capacity EWMA smoothing
  int goodput_window = 5;
  double headroom = 0.95;
  double fec_cap = 0.3;
};

struct Scenario {
  std::string name;
  std::string demand = "custom";
  std::uint64_t seed = 0;
  bool has_seed = false;

  double duration_s = 0;
  double tick_s = 0;  // default 0.1 filled by validate
  double epoch_s = 0; // default 1.0 filled by validate

  Method method = Method::proposed;
  OptimizerKind optimizer = OptimizerKind::greedy;

  std::vector<NodeId> nodes;
  std::vector<Link> links;
  NodeId server_node;

  std::vector<VideoAsset> assets;
  std::vector<GroupDef> groups;
  std::vector<ScheduleEvent> schedule;

  SessionParams params;
  GaParams ga;
  SaParams sa;
  QoeWeights qoe;

  const VideoAsset& asset(const AssetId& id) const {
    for (const VideoAsset& a : assets)
      if (a.id == id) return a;
    throw ConfigError("unknown asset: " + id);
  }

  const GroupDef& group_def(const GroupId& id) const {
    for (const GroupDef& g : groups)
      if (g.id == id) return g;
    throw ConfigError("unknown group: " + id);
  }
};

namespace detail {

inline bool near_multiple(double value, double base) {
  const double q = value / base;
  return std::abs(q - std::round(q)) < 1e-6;
}

} // namespace detail

/// Checks every scenario invariant, fills defaults, and validates the
/// topology against the set of client attachment nodes. Returns the
/// effective scenario. Throws ConfigError naming the offending field.
inline Scenario validate(Scenario s) {
  if (!s.has_seed)
    throw ConfigError("seed: an explicit seed is required for reproducible runs");
  if (s.tick_s == 0) s.tick_s = 0.1;
  if (s.epoch_s == 0) s.epoch_s = 1.0;
  if (!(s.tick_s > 0)) throw ConfigError("tick_s: must be > 0");
  if (!(s.epoch_s >= s.tick_s)) throw ConfigError("epoch_s: must be >= tick_s");
  if (!detail::near_multiple(s.epoch_s, s.tick_s))
    throw ConfigError("epoch_s: must be a whole multiple of tick_s");
  if (!(s.duration_s >= s.epoch_s)) throw ConfigError("duration_s: must be >= epoch_s");
  if (!detail::near_multiple(s.duration_s, s.tick_s))
    throw ConfigError("duration_s: must be a whole multiple of tick_s");

  const SessionParams& p = s.params;
  if (!(p.startup_threshold_s > 0)) throw ConfigError("params.startup_threshold_s: must be > 0");
  if (!(p.resume_threshold_s > 0)) throw ConfigError("params.resume_threshold_s: must be > 0");
  if (p.buffer_cap_s < p.startup_threshold_s || p.buffer_cap_s < p.resume_threshold_s)
    throw ConfigError("params.buffer_cap_s: must be >= startup and resume thresholds");
  if (!(p.safety > 0) || p.safety > 1) throw ConfigError("params.safety: must be in (0, 1]");
  if (!(p.alpha > 0) || p.alpha > 1) throw ConfigError("params.alpha: must be in (0, 1]");
  if (p.goodput_window < 1) throw ConfigError("params.goodput_window: must be >= 1");
  if (!(p.headroom > 0) || p.headroom > 1)
    throw ConfigError("params.headroom: must be in (0, 1]");
  if (p.fec_cap < 0 || p.fec_cap >= 1) throw ConfigError("params.fec_cap: must be in [0, 1)");
  if (p.low_water_s < 0) throw ConfigError("params.low_water_s: must be >= 0");
  s.ga.validate();
  s.sa.validate();

  if (s.assets.empty()) throw ConfigError("assets: at least one asset required");
  std::set<AssetId> asset_ids;
  for (VideoAsset& a : s.assets) {
    if (!asset_ids.insert(a.id).second) throw ConfigError("assets: duplicate id " + a.id);
    if (!(a.duration_s > 0)) throw ConfigError("asset " + a.id + ": duration_s must be > 0");
    if (!(a.segment_s > 0)) throw ConfigError("asset " + a.id + ": segment_s must be > 0");
    a.ladder = validate_ladder(a.ladder.tiers);
  }

  std::set<GroupId> group_ids;
  for (const GroupDef& g : s.groups) {
    if (!group_ids.insert(g.id).second) throw ConfigError("groups: duplicate id " + g.id);
    s.asset(g.asset); // throws on unknown asset
  }

  std::set<NodeId> client_nodes;
  for (const ScheduleEvent& e : s.schedule) {
    if (e.t < 0 || e.t > s.duration_s)
      throw ConfigError("schedule: event at t=" + std::to_string(e.t) +
                        " outside [0, duration]");
    if (!detail::near_multiple(e.t, s.tick_s))
      throw ConfigError("schedule: event time " + std::to_string(e.t) +
                        " is not aligned to tick_s");
    if (e.client.empty()) throw ConfigError("schedule: event missing client id");
    if (!group_ids.count(e.group))
      throw ConfigError("schedule: event references unknown group " + e.group);
    if (e.kind == ScheduleEvent::Kind::join) {
      if (e.node.empty()) throw ConfigError("schedule: join event missing node");
      client_nodes.insert(e.node);
    }
  }

  // Validates connectivity for every node that ever hosts a client.
  Topology topo = build_topology(s.nodes, s.links, s.server_node, client_nodes);
  s.nodes = topo.nodes;
  s.links = topo.links; // ids filled in
  return s;
}

} // namespace mcast
