#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "mcast/content.hpp"
#include "mcast/errors.hpp"
#include "mcast/topology.hpp"
#include "mcast/types.hpp"

namespace mcast {

enum class Phase { startup, playing, rebuffering, done };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::startup: return "startup";
    case Phase::playing: return "playing";
    case Phase::rebuffering: return "rebuffering";
    case Phase::done: return "done";
  }
  return "?";
}

struct ClientState {
  ClientId id;
  NodeId node;
  GroupId group;
  double join_time_s = 0;

  Phase phase = Phase::startup;
  double buffer_s = 0;
  double played_s = 0;
  double delivered_total_s = 0; // content seconds accepted into the buffer
  double startup_delay_s = 0;   // fixed once phase first leaves startup
  double rebuffer_s = 0;

  std::vector<double> quality_trace;       // one entry per played segment
  std::deque<double> throughput_samples;   // recent deliverable-rate estimates (bps)
  std::deque<double> loss_samples;         // recent raw path-loss observations
  double current_quality = 0;

  bool started() const { return phase != Phase::startup; }
};

/// One multicast group: a video, its member clients, and the delivery tree.
/// All members receive the same tier at any instant.
struct GroupState {
  GroupId id;
  const VideoAsset* asset = nullptr;
  std::map<ClientId, NodeId> members;
  MulticastTree tree;
  int current_tier = 0;
  double fec_fraction = 0;

  bool active() const { return !members.empty(); }

  std::set<NodeId> member_nodes() const {
    std::set<NodeId> nodes;
    for (const auto& [c, n] : members) nodes.insert(n);
    return nodes;
  }
};

inline void join(GroupState& group, const ClientId& client, const NodeId& node,
                 const Topology& topo) {
  if (group.members.count(client))
    throw MembershipError("client " + client + " already a member of " + group.id);
  group.members[client] = node;
  try {
    group.tree = shortest_path_tree(topo, group.id, group.member_nodes());
  } catch (...) {
    group.members.erase(client);
    throw;
  }
}

inline void leave(GroupState& group, const ClientId& client, const Topology& topo) {
  if (!group.members.count(client))
    throw MembershipError("client " + client + " is not a member of " + group.id);
  group.members.erase(client);
  if (group.active())
    group.tree = shortest_path_tree(topo, group.id, group.member_nodes());
  else
    group.tree = MulticastTree{group.id, {}, {}};
}

struct MemberDelivery {
  double delivered_s = 0;   // content seconds arriving this tick
  double observed_loss = 0; // raw compounded path loss, before FEC recovery
  double goodput_bps = 0;   // achieved content rate
  double available_bps = 0; // deliverable content-rate estimate on the path
};

/// Fluid delivery for one tick. When a link is oversubscribed every group on
/// it is scaled proportionally; the group's rate is the minimum share across
/// its tree. Loss compounds along each member's path and FEC absorbs it up
/// to the redundancy fraction.
inline std::map<ClientId, MemberDelivery> deliver_tick(
    const GroupState& group, const Topology& topo,
    const std::map<LinkId, double>& effective_cap,
    const std::map<LinkId, double>& total_load, double dt) {
  if (!group.active()) throw StateError("deliver_tick on inactive group " + group.id);
  const double bitrate = group.asset->ladder.tier(group.current_tier).bitrate_bps;
  const double wire_rate = bitrate * (1.0 + group.fec_fraction);

  double share = 1.0;
  for (const LinkId& l : group.tree.links) {
    const double cap = effective_cap.at(l);
    const double load = total_load.at(l);
    if (load > cap && load > 0) share = std::min(share, cap / load);
  }

  std::map<ClientId, MemberDelivery> out;
  for (const auto& [client, node] : group.members) {
    const std::vector<LinkId>& path = group.tree.member_paths.at(node);

    double pass = 1.0;
    double avail_wire = std::numeric_limits<double>::max() / 4;
    for (const LinkId& l : path) {
      pass *= 1.0 - topo.link(l).base_loss;
      const double cap = effective_cap.at(l);
      const double load = total_load.at(l);
      const double link_avail =
          load > cap ? cap * (wire_rate / load) : cap - load + wire_rate;
      avail_wire = std::min(avail_wire, link_avail);
    }
    const double raw_loss = 1.0 - pass;
    const double effective_loss = std::max(0.0, raw_loss - group.fec_fraction);

    MemberDelivery d;
    d.observed_loss = raw_loss;
    d.goodput_bps = bitrate * share * (1.0 - effective_loss);
    d.delivered_s = share * (1.0 - effective_loss) * dt;
    d.available_bps = avail_wire / (1.0 + group.fec_fraction) * (1.0 - raw_loss);
    out[client] = d;
  }
  return out;
}

struct PlaybackParams {
  double startup_threshold_s = 1.0;
  double resume_threshold_s = 1.0;
  double buffer_cap_s = 10.0;
};

namespace detail {

// Fill the buffer at rate `r` for `span` seconds, honoring the buffer cap
// and the asset running out of content. Returns accepted content seconds.
inline double fill_buffer(ClientState& c, const VideoAsset& asset, double r, double span,
                          double cap) {
  double want = r * span;
  want = std::min(want, asset.duration_s - c.delivered_total_s);
  want = std::min(want, cap - c.buffer_s);
  want = std::max(want, 0.0);
  c.buffer_s += want;
  c.delivered_total_s += want;
  return want;
}

inline void record_segments(ClientState& c, const VideoAsset& asset, double prev_played,
                            double quality) {
  const double seg = asset.segment_s;
  const int total = asset.segment_count();
  int completed = static_cast<int>(std::floor((prev_played + 1e-9) / seg));
  int now = static_cast<int>(std::floor((c.played_s + 1e-9) / seg));
  if (c.played_s >= asset.duration_s - 1e-9) now = total;
  now = std::min(now, total);
  for (int k = completed; k < now; ++k) c.quality_trace.push_back(quality);
}

} // namespace detail

/// Advances one client's playback by one tick. Delivery fills the buffer
/// continuously through the tick; playback consumes it at 1 s/s while in the
/// playing phase. Phase transitions are resolved at sub-tick precision so
/// startup delay and stall time are accounted exactly.
inline void step_playback(ClientState& c, const VideoAsset& asset, double group_quality,
                          double delivered_s, double dt, double tick_start_s,
                          const PlaybackParams& p) {
  if (dt <= 0) throw StateError("step_playback: dt must be > 0");
  if (c.phase == Phase::done) return;

  const double rate = delivered_s / dt; // content seconds per wall second
  double remaining = dt;
  c.current_quality = group_quality;

  while (remaining > 1e-12) {
    if (c.phase == Phase::startup || c.phase == Phase::rebuffering) {
      const double threshold =
          c.phase == Phase::startup ? p.startup_threshold_s : p.resume_threshold_s;
      // Content exhausted: whatever is buffered is all there will be.
      const bool exhausted = c.delivered_total_s >= asset.duration_s - 1e-9;
      if (exhausted && c.buffer_s <= 1e-12) {
        c.played_s = asset.duration_s;
        c.phase = Phase::done;
        break;
      }
      if (c.buffer_s >= threshold - 1e-9 || (exhausted && c.buffer_s > 1e-12)) {
        if (c.phase == Phase::startup)
          c.startup_delay_s = tick_start_s + (dt - remaining) - c.join_time_s;
        c.phase = Phase::playing;
        continue;
      }
      if (rate <= 0) {
        if (c.phase == Phase::rebuffering) c.rebuffer_s += remaining;
        remaining = 0;
        break;
      }
      const double t_fill = (threshold - c.buffer_s) / rate;
      if (t_fill >= remaining) {
        detail::fill_buffer(c, asset, rate, remaining, p.buffer_cap_s);
        if (c.phase == Phase::rebuffering) c.rebuffer_s += remaining;
        remaining = 0;
      } else {
        detail::fill_buffer(c, asset, rate, t_fill, p.buffer_cap_s);
        if (c.phase == Phase::rebuffering) c.rebuffer_s += t_fill;
        if (c.phase == Phase::startup)
          c.startup_delay_s = tick_start_s + (dt - remaining) + t_fill - c.join_time_s;
        c.phase = Phase::playing;
        remaining -= t_fill;
      }
    } else { // playing
      const double to_end = asset.duration_s - c.played_s;
      double span = std::min(remaining, to_end);
      // Time until the buffer runs dry at net drain (1 - rate).
      if (rate < 1.0 && c.buffer_s < span * (1.0 - rate))
        span = c.buffer_s / (1.0 - rate);
      span = std::max(span, 0.0);

      const double prev_played = c.played_s;
      detail::fill_buffer(c, asset, rate, span, p.buffer_cap_s);
      const double play = std::min(span, c.buffer_s);
      c.played_s += play;
      c.buffer_s -= play;
      if (c.buffer_s < 1e-12) c.buffer_s = 0;
      detail::record_segments(c, asset, prev_played, group_quality);
      remaining -= span;

      if (c.played_s >= asset.duration_s - 1e-9) {
        c.played_s = asset.duration_s;
        c.phase = Phase::done;
        break;
      }
      if (c.buffer_s <= 1e-12) c.phase = Phase::rebuffering;
    }
  }
}

struct FeedbackReport {
  ClientId client_id;
  double buffer_s = 0;
  double goodput_bps = 0; // arithmetic mean of the sample window
  double loss = 0;        // mean observed loss over the window
  double quality = 0;
  bool cold_start = false;
};

inline FeedbackReport feedback(const ClientState& c) {
  FeedbackReport r;
  r.client_id = c.id;
  r.buffer_s = c.buffer_s;
  r.cold_start = c.throughput_samples.empty();
  if (!r.cold_start) {
    double sum = 0;
    for (double s : c.throughput_samples) sum += s;
    r.goodput_bps = sum / static_cast<double>(c.throughput_samples.size());
  }
  if (!c.loss_samples.empty()) {
    double sum = 0;
    for (double s : c.loss_samples) sum += s;
    r.loss = sum / static_cast<double>(c.loss_samples.size());
  }
  r.quality = c.current_quality;
  return r;
}

} // namespace mcast
