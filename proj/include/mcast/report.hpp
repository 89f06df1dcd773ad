#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcast/engine.hpp"
#include "mcast/errors.hpp"
#include "mcast/metrics.hpp"
#include "mcast/scenario_io.hpp"

namespace mcast {

inline ordered_json summary_to_json(const MetricsSummary& m, const Scenario& scenario) {
  ordered_json j;
  j["version"] = "1.0";
  j["scenario"] = m.scenario_name;
  j["demand"] = m.demand;
  j["method"] = m.method;
  j["optimizer"] = m.optimizer;
  j["seed"] = m.seed;
  j["duration_s"] = m.duration_s;
  j["sessions"] = m.sessions;
  j["completed_sessions"] = m.completed_sessions;
  j["never_started_sessions"] = m.never_started_sessions;
  j["qoe_mean"] = m.mean_qoe;
  j["qoe_p10"] = m.p10_qoe;
  j["qoe_median"] = m.median_qoe;
  j["bandwidth_utilization_pct"] = m.utilization_pct;
  j["offered_utilization_pct"] = m.offered_utilization_pct;
  j["startup_delay_mean_s"] = m.mean_startup_delay_s;
  j["rebuffer_ratio"] = m.rebuffer_ratio;
  j["quality_mean"] = m.mean_quality;
  j["total_watched_s"] = m.total_watched_s;
  j["config"] = scenario_to_json(scenario);
  return j;
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string format_bps(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

} // namespace detail

inline void write_summary_json(const MetricsSummary& m, const Scenario& scenario,
                               const std::string& path) {
  detail::write_file(path, summary_to_json(m, scenario).dump(2) + "\n");
}

inline void write_timeseries_csv(const std::vector<LinkSample>& series,
                                 const std::string& path) {
  std::string out = "tick,link_id,load_bps,capacity_bps\n";
  for (const LinkSample& s : series) {
    out += std::to_string(s.tick);
    out += ',';
    out += s.link;
    out += ',';
    out += detail::format_bps(s.load_bps);
    out += ',';
    out += detail::format_bps(s.capacity_bps);
    out += '\n';
  }
  detail::write_file(path, out);
}

inline void write_clients_csv(const std::vector<ClientSample>& series,
                              const std::string& path) {
  std::string out = "tick,client_id,buffer_s\n";
  for (const ClientSample& s : series) {
    out += std::to_string(s.tick);
    out += ',';
    out += s.client;
    out += ',';
    out += detail::format_bps(s.buffer_s);
    out += '\n';
  }
  detail::write_file(path, out);
}

inline void write_comparison_csv(const std::string& scenario_name,
                                 const std::vector<ComparisonRow>& rows,
                                 const std::string& path) {
  std::string out = "scenario,metric,traditional,proposed,improvement_pct\n";
  for (const ComparisonRow& r : rows) {
    char buf[256];
    if (r.improvement_pct)
      std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f,%.1f\n", scenario_name.c_str(),
                    r.metric.c_str(), r.traditional, r.proposed, *r.improvement_pct);
    else
      std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f,undefined\n", scenario_name.c_str(),
                    r.metric.c_str(), r.traditional, r.proposed);
    out += buf;
  }
  detail::write_file(path, out);
}

/// Human-readable table in the shape Scenario | Traditional | Proposed |
/// Improvement (%).
inline std::string render_comparison_table(const std::string& scenario_name,
                                           const std::vector<ComparisonRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-28s %-14s %12s %12s %16s\n", "Scenario", "Metric",
                "Traditional", "Proposed", "Improvement (%)");
  out += buf;
  out += std::string(86, '-') + "\n";
  for (const ComparisonRow& r : rows) {
    if (r.improvement_pct)
      std::snprintf(buf, sizeof(buf), "%-28s %-14s %12.2f %12.2f %+15.1f%%\n",
                    scenario_name.c_str(), r.metric.c_str(), r.traditional, r.proposed,
                    *r.improvement_pct);
    else
      std::snprintf(buf, sizeof(buf), "%-28s %-14s %12.2f %12.2f %16s\n",
                    scenario_name.c_str(), r.metric.c_str(), r.traditional, r.proposed,
                    "undefined");
    out += buf;
  }
  return out;
}

} // namespace mcast
