#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcast/allocator.hpp"
#include "mcast/content.hpp"
#include "mcast/errors.hpp"
#include "mcast/metrics.hpp"
#include "mcast/rng.hpp"
#include "mcast/scenario.hpp"
#include "mcast/session.hpp"
#include "mcast/topology.hpp"

namespace mcast {

struct LinkSample {
  long tick = 0;
  LinkId link;
  double load_bps = 0;
  double capacity_bps = 0;
};

struct ClientSample {
  long tick = 0;
  ClientId client;
  double buffer_s = 0;
};

struct RunResult {
  MetricsSummary summary;
  std::vector<LinkSample> link_series;     // filled when requested
  std::vector<ClientSample> client_series; // filled when requested
};

namespace detail {

struct SessionOutcome {
  SessionTrace trace;
  bool started = false;
  bool completed = false;
};

inline double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0;
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

} // namespace detail

/// Deterministic tick-driven simulation: scheduled churn, channel
/// variation, multicast delivery, playback, and the per-epoch feedback ->
/// prediction -> allocation loop. Identical (scenario, seed) inputs give
/// bit-identical results.
class Engine {
public:
  explicit Engine(Scenario scenario, bool record_timeseries = false)
      : s_(validate(std::move(scenario))),
        topo_(build_topology(s_.nodes, s_.links, s_.server_node)),
        capacity_(topo_),
        record_(record_timeseries),
        rng_capacity_(Rng::stream(s_.seed, "capacity")),
        rng_ga_(Rng::stream(s_.seed, "ga")),
        rng_sa_(Rng::stream(s_.seed, "sa")),
        rng_arrivals_(Rng::stream(s_.seed, "arrivals")) {
    ticks_ = static_cast<long>(std::llround(s_.duration_s / s_.tick_s));
    ticks_per_epoch_ = static_cast<long>(std::llround(s_.epoch_s / s_.tick_s));
    for (const Link& l : topo_.links) nominal_caps_[l.id] = l.capacity_bps;
    // Stable order: time first, file order for simultaneous events.
    events_.resize(s_.schedule.size());
    for (std::size_t i = 0; i < s_.schedule.size(); ++i) events_[i] = i;
    std::stable_sort(events_.begin(), events_.end(), [&](std::size_t a, std::size_t b) {
      return s_.schedule[a].t < s_.schedule[b].t;
    });
  }

  RunResult run() {
    RunResult result;
    std::size_t next_event = 0;

    for (long tick = 0; tick < ticks_; ++tick) {
      const double now = static_cast<double>(tick) * s_.tick_s;

      try {
        apply_events(next_event, tick, now);
        const std::map<LinkId, double> effective = capacity_.step(rng_capacity_);
        if (s_.method == Method::proposed)
          for (const auto& [l, cap] : effective)
            capacity_ewma_[l].observe(cap, s_.params.alpha);

        const std::map<LinkId, double> loads = current_loads();
        account_utilization(tick, effective, loads, result);
        deliver_and_play(effective, loads, now, tick, result);

        if ((tick + 1) % ticks_per_epoch_ == 0) reallocate();
      } catch (const ConfigError& e) {
        throw ConfigError("tick " + std::to_string(tick) + ": " + e.what());
      } catch (const InfeasibleError& e) {
        throw InfeasibleError("tick " + std::to_string(tick) + ": " + e.what());
      } catch (const MembershipError& e) {
        throw MembershipError("tick " + std::to_string(tick) + ": " + e.what());
      } catch (const RoutingError& e) {
        throw RoutingError("tick " + std::to_string(tick) + ": " + e.what());
      }
    }

    // Sessions still open at the end of the run.
    for (auto& [id, client] : clients_) finalize_session(client);
    result.summary = summarize();
    return result;
  }

  const Scenario& scenario() const { return s_; }

private:
  void apply_events(std::size_t& next_event, long tick, double now) {
    while (next_event < events_.size()) {
      const ScheduleEvent& e = s_.schedule[events_[next_event]];
      const long event_tick = static_cast<long>(std::llround(e.t / s_.tick_s));
      if (event_tick > tick) break;
      ++next_event;
      if (e.kind == ScheduleEvent::Kind::join) {
        if (clients_.count(e.client))
          throw MembershipError("client " + e.client + " is already active");
        GroupState& g = group_for(e.group);
        ClientState c;
        c.id = e.client;
        c.node = e.node;
        c.group = e.group;
        c.join_time_s = now;
        join(g, e.client, e.node, topo_);
        clients_.emplace(e.client, std::move(c));
      } else {
        auto it = clients_.find(e.client);
        if (it == clients_.end()) continue; // already finished and departed
        finalize_session(it->second);
        leave(groups_.at(e.group), e.client, topo_);
        clients_.erase(it);
      }
    }
  }

  GroupState& group_for(const GroupId& id) {
    auto it = groups_.find(id);
    if (it != groups_.end()) return it->second;
    const GroupDef& def = s_.group_def(id);
    GroupState g;
    g.id = id;
    g.asset = &s_.asset(def.asset);
    g.tree = MulticastTree{id, {}, {}};
    return groups_.emplace(id, std::move(g)).first->second;
  }

  std::map<LinkId, double> current_loads() const {
    std::map<GroupId, GroupLoadInput> inputs;
    for (const auto& [gid, g] : groups_) {
      if (!g.active()) continue;
      inputs[gid] =
          GroupLoadInput{&g.tree, &g.asset->ladder, g.current_tier, g.fec_fraction};
    }
    return link_load(inputs);
  }

  void account_utilization(long tick, const std::map<LinkId, double>& effective,
                           const std::map<LinkId, double>& loads, RunResult& out) {
    for (const auto& [l, cap] : effective) {
      auto it = loads.find(l);
      const double load = it == loads.end() ? 0.0 : it->second;
      utilization_.add(load, cap);
      if (record_) out.link_series.push_back(LinkSample{tick, l, load, cap});
    }
  }

  void deliver_and_play(const std::map<LinkId, double>& effective,
                        const std::map<LinkId, double>& loads, double now, long tick,
                        RunResult& out) {
    std::map<ClientId, MemberDelivery> deliveries;
    for (const auto& [gid, g] : groups_) {
      if (!g.active()) continue;
      auto d = deliver_tick(g, topo_, effective, loads, s_.tick_s);
      deliveries.insert(d.begin(), d.end());
    }

    std::vector<ClientId> finished;
    for (auto& [cid, client] : clients_) {
      const GroupState& g = groups_.at(client.group);
      const MemberDelivery& d = deliveries.at(cid);
      const double quality = g.asset->ladder.tier(g.current_tier).quality;

      PlaybackParams pp;
      pp.startup_threshold_s = s_.params.startup_threshold_s;
      pp.resume_threshold_s = s_.params.resume_threshold_s;
      pp.buffer_cap_s = s_.params.buffer_cap_s;
      step_playback(client, *g.asset, quality, d.delivered_s, s_.tick_s, now, pp);

      client.throughput_samples.push_back(d.available_bps);
      while (static_cast<int>(client.throughput_samples.size()) > s_.params.goodput_window)
        client.throughput_samples.pop_front();
      client.loss_samples.push_back(d.observed_loss);
      while (static_cast<int>(client.loss_samples.size()) > s_.params.goodput_window)
        client.loss_samples.pop_front();

      if (record_) out.client_series.push_back(ClientSample{tick, cid, client.buffer_s});
      if (client.phase == Phase::done) finished.push_back(cid);
    }

    // Completed viewers close their stream.
    for (const ClientId& cid : finished) {
      ClientState& client = clients_.at(cid);
      finalize_session(client);
      leave(groups_.at(client.group), cid, topo_);
      clients_.erase(cid);
    }
  }

  void reallocate() {
    AllocationProblem problem;
    for (const auto& [gid, g] : groups_) {
      if (!g.active()) continue;
      problem.groups.push_back(ProblemGroup{gid, static_cast<int>(g.members.size()),
                                            &g.asset->ladder, g.tree.links,
                                            g.fec_fraction});
    }
    if (problem.groups.empty()) return;
    problem.headroom = s_.params.headroom;

    if (s_.method == Method::traditional) {
      problem.predicted_capacity_bps = nominal_caps_;
      install(traditional_allocate(problem));
      return;
    }

    for (const auto& [l, cap] : nominal_caps_) {
      auto it = capacity_ewma_.find(l);
      problem.predicted_capacity_bps[l] =
          (it != capacity_ewma_.end() && it->second.value) ? *it->second.value : cap;
    }

    AllocationPlan raw;
    switch (s_.optimizer) {
      case OptimizerKind::greedy: raw = greedy_allocate(problem); break;
      case OptimizerKind::ga: raw = ga_allocate(problem, s_.ga, rng_ga_.next_u64()); break;
      case OptimizerKind::sa: raw = sa_allocate(problem, s_.sa, rng_sa_.next_u64()); break;
    }

    AllocationPlan previous;
    std::map<GroupId, GroupFeedback> fb;
    for (const ProblemGroup& pg : problem.groups) {
      const GroupState& g = groups_.at(pg.id);
      previous[pg.id] = g.current_tier;
      GroupFeedback f;
      for (const auto& [cid, node] : g.members) {
        const ClientState& c = clients_.at(cid);
        const FeedbackReport report = feedback(c);
        f.min_buffer_s = std::min(f.min_buffer_s, report.buffer_s);
        f.max_loss = std::max(f.max_loss, report.loss);
        if (!report.cold_start) {
          f.min_predicted_goodput_bps = std::min(
              f.min_predicted_goodput_bps, predict_client_goodput(c.throughput_samples));
          f.has_goodput = true;
        }
      }
      fb[pg.id] = f;
    }

    install(adapt_quality(problem, raw, previous, fb, s_.params.safety,
                          s_.params.low_water_s));
    for (const ProblemGroup& pg : problem.groups)
      groups_.at(pg.id).fec_fraction =
          fec_fraction_for_loss(fb.at(pg.id).max_loss, s_.params.fec_cap);
  }

  void install(const AllocationPlan& plan) {
    for (const auto& [gid, tier] : plan) groups_.at(gid).current_tier = tier;
  }

  void finalize_session(const ClientState& c) {
    detail::SessionOutcome o;
    o.trace.quality_trace = c.quality_trace;
    if (c.played_s > 0 && o.trace.quality_trace.empty())
      o.trace.quality_trace.push_back(c.current_quality); // partial first segment
    o.trace.rebuffer_s = c.rebuffer_s;
    o.trace.startup_delay_s = c.startup_delay_s;
    o.trace.watched_s = c.played_s;
    o.started = c.started();
    o.completed = c.phase == Phase::done;
    sessions_.push_back(std::move(o));
  }

  MetricsSummary summarize() const {
    MetricsSummary m;
    m.scenario_name = s_.name;
    m.demand = s_.demand;
    m.method = to_string(s_.method);
    m.optimizer = to_string(s_.optimizer);
    m.seed = s_.seed;
    m.duration_s = s_.duration_s;
    m.sessions = static_cast<int>(sessions_.size());

    std::vector<double> qoe;
    double startup_sum = 0;
    int startup_count = 0;
    double rebuffer_sum = 0, watched_sum = 0, quality_sum = 0;
    int quality_count = 0;
    for (const detail::SessionOutcome& o : sessions_) {
      if (o.completed) ++m.completed_sessions;
      if (!o.started || !(o.trace.watched_s > 0)) {
        ++m.never_started_sessions;
        qoe.push_back(0.0); // waited and saw nothing
        continue;
      }
      qoe.push_back(session_qoe(o.trace, s_.qoe));
      startup_sum += o.trace.startup_delay_s;
      ++startup_count;
      rebuffer_sum += o.trace.rebuffer_s;
      watched_sum += o.trace.watched_s;
      if (!o.trace.quality_trace.empty()) {
        double q = 0;
        for (double v : o.trace.quality_trace) q += v;
        quality_sum += q / static_cast<double>(o.trace.quality_trace.size());
        ++quality_count;
      }
    }

    if (!qoe.empty()) {
      double sum = 0;
      for (double v : qoe) sum += v;
      m.mean_qoe = sum / static_cast<double>(qoe.size());
      std::vector<double> sorted = qoe;
      std::sort(sorted.begin(), sorted.end());
      m.p10_qoe = detail::nearest_rank(sorted, 0.10);
      m.median_qoe = detail::nearest_rank(sorted, 0.50);
    }
    if (startup_count > 0)
      m.mean_startup_delay_s = startup_sum / static_cast<double>(startup_count);
    if (watched_sum > 0) m.rebuffer_ratio = rebuffer_sum / watched_sum;
    if (quality_count > 0) m.mean_quality = quality_sum / static_cast<double>(quality_count);
    m.total_watched_s = watched_sum;
    if (utilization_.capacity > 0) {
      m.utilization_pct = utilization_.delivered_pct();
      m.offered_utilization_pct = utilization_.offered_pct();
    }
    return m;
  }

  Scenario s_;
  Topology topo_;
  CapacityProcess capacity_;
  bool record_;
  Rng rng_capacity_, rng_ga_, rng_sa_, rng_arrivals_;

  long ticks_ = 0;
  long ticks_per_epoch_ = 0;
  std::map<LinkId, double> nominal_caps_;
  std::vector<std::size_t> events_;

  std::map<GroupId, GroupState> groups_;
  std::map<ClientId, ClientState> clients_;
  std::map<LinkId, EwmaState> capacity_ewma_;
  UtilizationAccumulator utilization_;
  std::vector<detail::SessionOutcome> sessions_;
};

/// One-shot convenience wrapper.
inline RunResult run(const Scenario& scenario, bool record_timeseries = false) {
  Engine engine(scenario, record_timeseries);
  return engine.run();
}

} // namespace mcast
