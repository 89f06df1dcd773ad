#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcast/errors.hpp"

namespace mcast {

struct QoeWeights {
  double w_quality = 1.0;
  double w_rebuffer = 2.0;
  double w_switch = 0.5;
  double w_startup = 0.2;
  double startup_cap_s = 5.0;
};

/// What one client experienced over its session.
struct SessionTrace {
  std::vector<double> quality_trace; // one value per played segment
  double rebuffer_s = 0;
  double startup_delay_s = 0;
  double watched_s = 0;
};

/// Session QoE on a 0-100 scale: mean segment quality, penalized by stall
/// ratio, quality-switch magnitude and startup delay.
inline double session_qoe(const SessionTrace& trace, const QoeWeights& w = {}) {
  if (!(trace.watched_s > 0)) throw StateError("session_qoe: watched_s must be > 0");
  double mean_quality = 0;
  for (double q : trace.quality_trace) mean_quality += q;
  if (!trace.quality_trace.empty())
    mean_quality /= static_cast<double>(trace.quality_trace.size());

  double mean_switch = 0;
  if (trace.quality_trace.size() >= 2) {
    for (std::size_t i = 1; i < trace.quality_trace.size(); ++i)
      mean_switch += std::abs(trace.quality_trace[i] - trace.quality_trace[i - 1]);
    mean_switch /= static_cast<double>(trace.quality_trace.size() - 1);
  }

  const double rebuffer_ratio = trace.rebuffer_s / trace.watched_s;
  const double startup_term =
      std::min(trace.startup_delay_s, w.startup_cap_s) / w.startup_cap_s;
  const double raw = w.w_quality * mean_quality - w.w_rebuffer * rebuffer_ratio -
                     w.w_switch * mean_switch - w.w_startup * startup_term;
  return std::clamp(100.0 * raw, 0.0, 100.0);
}

/// Capacity-weighted utilization accumulator over (link, tick) cells.
/// Delivered load is clipped at capacity; offered load is not.
struct UtilizationAccumulator {
  double delivered = 0;
  double offered = 0;
  double capacity = 0;

  void add(double load_bps, double capacity_bps) {
    delivered += std::min(load_bps, capacity_bps);
    offered += load_bps;
    capacity += capacity_bps;
  }

  double delivered_pct() const {
    if (!(capacity > 0)) throw StateError("bandwidth utilization over an empty run");
    return 100.0 * delivered / capacity;
  }

  double offered_pct() const {
    if (!(capacity > 0)) throw StateError("bandwidth utilization over an empty run");
    return 100.0 * offered / capacity;
  }
};

/// 100 * sum(min(load, cap)) / sum(cap) over aligned (link, tick) samples.
inline double bandwidth_utilization(const std::vector<double>& loads,
                                    const std::vector<double>& capacities) {
  if (loads.size() != capacities.size())
    throw StateError("bandwidth_utilization: mismatched sample counts");
  UtilizationAccumulator acc;
  for (std::size_t i = 0; i < loads.size(); ++i) acc.add(loads[i], capacities[i]);
  return acc.delivered_pct();
}

struct MetricsSummary {
  std::string scenario_name;
  std::string demand;
  std::string method;
  std::string optimizer;
  std::uint64_t seed = 0;
  double duration_s = 0;

  int sessions = 0;
  int completed_sessions = 0;
  int never_started_sessions = 0;

  double mean_qoe = 0;
  double p10_qoe = 0;
  double median_qoe = 0;
  double utilization_pct = 0;         // delivered, capacity-clipped
  double offered_utilization_pct = 0; // may exceed 100 for the static baseline
  double mean_startup_delay_s = 0;    // over sessions that started
  double rebuffer_ratio = 0;          // total stall / total watched
  double mean_quality = 0;
  double total_watched_s = 0;
};

struct ComparisonRow {
  std::string metric;
  double traditional = 0;
  double proposed = 0;
  std::optional<double> improvement_pct; // empty when traditional is 0
};

/// Relative improvement per metric, rounded to one decimal. A zero
/// traditional value yields an undefined (absent) improvement, not inf.
inline std::vector<ComparisonRow> compare(const MetricsSummary& traditional,
                                          const MetricsSummary& proposed) {
  if (traditional.scenario_name != proposed.scenario_name ||
      traditional.seed != proposed.seed)
    throw StateError("compare: summaries come from different scenario/seed runs");

  auto row = [](std::string metric, double t, double p) {
    ComparisonRow r{std::move(metric), t, p, std::nullopt};
    if (t != 0) r.improvement_pct = std::round(1000.0 * (p - t) / t) / 10.0;
    return r;
  };
  return {
      row("qoe_mean", traditional.mean_qoe, proposed.mean_qoe),
      row("bandwidth_utilization_pct", traditional.utilization_pct,
          proposed.utilization_pct),
      row("startup_delay_s", traditional.mean_startup_delay_s,
          proposed.mean_startup_delay_s),
      row("rebuffer_ratio", traditional.rebuffer_ratio, proposed.rebuffer_ratio),
  };
}

} // namespace mcast
