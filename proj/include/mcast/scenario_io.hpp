#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcast/errors.hpp"
#include "mcast/scenario.hpp"

namespace mcast {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Unknown fields are rejected: a silently absorbed typo (say "capicity")
// would invalidate an experiment without a trace.
inline void check_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ParseError("unknown field \"" + key + "\" in " + where);
}

inline double get_number(const ordered_json& obj, const std::string& key,
                         const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing field \"" + key + "\"");
  if (!obj.at(key).is_number())
    throw ParseError(where + ": field \"" + key + "\" must be a number");
  return obj.at(key).get<double>();
}

inline double get_number_or(const ordered_json& obj, const std::string& key, double dflt,
                            const std::string& where) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_number())
    throw ParseError(where + ": field \"" + key + "\" must be a number");
  return obj.at(key).get<double>();
}

inline std::string get_string(const ordered_json& obj, const std::string& key,
                              const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing field \"" + key + "\"");
  if (!obj.at(key).is_string())
    throw ParseError(where + ": field \"" + key + "\" must be a string");
  return obj.at(key).get<std::string>();
}

} // namespace detail

/// Parses and validates a scenario from JSON text. Unknown fields anywhere
/// are rejected; malformed text reports line and column.
inline Scenario parse_scenario_text(const std::string& text,
                                    const std::string& origin = "<string>") {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(origin + ": scenario must be a JSON object");

  detail::check_keys(j,
                     {"name", "demand", "seed", "duration_s", "tick_s", "epoch_s", "method",
                      "optimizer", "topology", "assets", "groups", "schedule", "params",
                      "ga", "sa", "qoe"},
                     "scenario");

  Scenario s;
  if (j.contains("name")) s.name = detail::get_string(j, "name", "scenario");
  if (j.contains("demand")) s.demand = detail::get_string(j, "demand", "scenario");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned())
      throw ParseError("scenario: field \"seed\" must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.has_seed = true;
  }
  s.duration_s = detail::get_number(j, "duration_s", "scenario");
  s.tick_s = detail::get_number_or(j, "tick_s", 0.0, "scenario");
  s.epoch_s = detail::get_number_or(j, "epoch_s", 0.0, "scenario");

  if (j.contains("method")) {
    const std::string m = detail::get_string(j, "method", "scenario");
    if (m == "traditional") s.method = Method::traditional;
    else if (m == "proposed") s.method = Method::proposed;
    else throw ConfigError("method: must be \"traditional\" or \"proposed\", got \"" + m + "\"");
  }
  if (j.contains("optimizer")) {
    const std::string o = detail::get_string(j, "optimizer", "scenario");
    if (o == "greedy") s.optimizer = OptimizerKind::greedy;
    else if (o == "ga") s.optimizer = OptimizerKind::ga;
    else if (o == "sa") s.optimizer = OptimizerKind::sa;
    else throw ConfigError("optimizer: must be \"greedy\", \"ga\" or \"sa\", got \"" + o + "\"");
  }

  if (!j.contains("topology")) throw ConfigError("scenario: missing field \"topology\"");
  {
    const ordered_json& t = j.at("topology");
    detail::check_keys(t, {"server", "nodes", "links"}, "topology");
    s.server_node = detail::get_string(t, "server", "topology");
    if (!t.contains("nodes") || !t.at("nodes").is_array())
      throw ConfigError("topology: missing \"nodes\" array");
    for (const auto& n : t.at("nodes")) s.nodes.push_back(n.get<std::string>());
    if (!t.contains("links") || !t.at("links").is_array())
      throw ConfigError("topology: missing \"links\" array");
    int idx = 0;
    for (const auto& lj : t.at("links")) {
      const std::string where = "topology.links[" + std::to_string(idx++) + "]";
      detail::check_keys(lj,
                         {"id", "src", "dst", "capacity_bps", "latency_ms", "base_loss",
                          "variability"},
                         where);
      Link l;
      if (lj.contains("id")) l.id = detail::get_string(lj, "id", where);
      l.src = detail::get_string(lj, "src", where);
      l.dst = detail::get_string(lj, "dst", where);
      l.capacity_bps = detail::get_number(lj, "capacity_bps", where);
      l.latency_ms = detail::get_number_or(lj, "latency_ms", 1.0, where);
      l.base_loss = detail::get_number_or(lj, "base_loss", 0.0, where);
      if (lj.contains("variability")) {
        const ordered_json& v = lj.at("variability");
        detail::check_keys(
            v, {"good_multiplier", "bad_multiplier", "p_good_to_bad", "p_bad_to_good"},
            where + ".variability");
        LinkVariability lv;
        lv.good_multiplier = detail::get_number_or(v, "good_multiplier", 1.0, where);
        lv.bad_multiplier = detail::get_number(v, "bad_multiplier", where + ".variability");
        lv.p_good_to_bad = detail::get_number(v, "p_good_to_bad", where + ".variability");
        lv.p_bad_to_good = detail::get_number(v, "p_bad_to_good", where + ".variability");
        l.variability = lv;
      }
      s.links.push_back(std::move(l));
    }
  }

  if (!j.contains("assets") || !j.at("assets").is_array())
    throw ConfigError("scenario: missing \"assets\" array");
  for (const auto& aj : j.at("assets")) {
    const std::string where = "assets[" + std::to_string(s.assets.size()) + "]";
    detail::check_keys(aj, {"id", "duration_s", "segment_s", "ladder"}, where);
    VideoAsset a;
    a.id = detail::get_string(aj, "id", where);
    a.duration_s = detail::get_number(aj, "duration_s", where);
    a.segment_s = detail::get_number(aj, "segment_s", where);
    if (!aj.contains("ladder") || !aj.at("ladder").is_array())
      throw ConfigError(where + ": missing \"ladder\" array");
    for (const auto& tj : aj.at("ladder")) {
      detail::check_keys(tj, {"bitrate_bps", "quality"}, where + ".ladder");
      a.ladder.tiers.push_back(Tier{detail::get_number(tj, "bitrate_bps", where),
                                    detail::get_number(tj, "quality", where)});
    }
    s.assets.push_back(std::move(a));
  }

  if (!j.contains("groups") || !j.at("groups").is_array())
    throw ConfigError("scenario: missing \"groups\" array");
  for (const auto& gj : j.at("groups")) {
    const std::string where = "groups[" + std::to_string(s.groups.size()) + "]";
    detail::check_keys(gj, {"id", "asset"}, where);
    s.groups.push_back(GroupDef{detail::get_string(gj, "id", where),
                                detail::get_string(gj, "asset", where)});
  }

  if (j.contains("schedule")) {
    if (!j.at("schedule").is_array()) throw ParseError("schedule: must be an array");
    for (const auto& ej : j.at("schedule")) {
      const std::string where = "schedule[" + std::to_string(s.schedule.size()) + "]";
      detail::check_keys(ej, {"t", "event", "client", "group", "node"}, where);
      ScheduleEvent e;
      e.t = detail::get_number(ej, "t", where);
      const std::string kind = detail::get_string(ej, "event", where);
      if (kind == "join") e.kind = ScheduleEvent::Kind::join;
      else if (kind == "leave") e.kind = ScheduleEvent::Kind::leave;
      else throw ConfigError(where + ": event must be \"join\" or \"leave\"");
      e.client = detail::get_string(ej, "client", where);
      e.group = detail::get_string(ej, "group", where);
      if (ej.contains("node")) e.node = detail::get_string(ej, "node", where);
      s.schedule.push_back(std::move(e));
    }
  }

  if (j.contains("params")) {
    const ordered_json& p = j.at("params");
    detail::check_keys(p,
                       {"startup_threshold_s", "resume_threshold_s", "buffer_cap_s",
                        "low_water_s", "safety", "alpha", "goodput_window", "headroom",
                        "fec_cap"},
                       "params");
    SessionParams& sp = s.params;
    sp.startup_threshold_s =
        detail::get_number_or(p, "startup_threshold_s", sp.startup_threshold_s, "params");
    sp.resume_threshold_s =
        detail::get_number_or(p, "resume_threshold_s", sp.resume_threshold_s, "params");
    sp.buffer_cap_s = detail::get_number_or(p, "buffer_cap_s", sp.buffer_cap_s, "params");
    sp.low_water_s = detail::get_number_or(p, "low_water_s", sp.low_water_s, "params");
    sp.safety = detail::get_number_or(p, "safety", sp.safety, "params");
    sp.alpha = detail::get_number_or(p, "alpha", sp.alpha, "params");
    sp.goodput_window = static_cast<int>(
        detail::get_number_or(p, "goodput_window", sp.goodput_window, "params"));
    sp.headroom = detail::get_number_or(p, "headroom", sp.headroom, "params");
    sp.fec_cap = detail::get_number_or(p, "fec_cap", sp.fec_cap, "params");
  }

  if (j.contains("ga")) {
    const ordered_json& g = j.at("ga");
    detail::check_keys(g,
                       {"population", "generations", "tournament", "crossover_prob",
                        "mutation_prob", "elitism", "penalty_lambda", "parallel"},
                       "ga");
    s.ga.population = static_cast<int>(detail::get_number_or(g, "population", s.ga.population, "ga"));
    s.ga.generations =
        static_cast<int>(detail::get_number_or(g, "generations", s.ga.generations, "ga"));
    s.ga.tournament =
        static_cast<int>(detail::get_number_or(g, "tournament", s.ga.tournament, "ga"));
    s.ga.crossover_prob = detail::get_number_or(g, "crossover_prob", s.ga.crossover_prob, "ga");
    s.ga.mutation_prob = detail::get_number_or(g, "mutation_prob", s.ga.mutation_prob, "ga");
    s.ga.elitism = static_cast<int>(detail::get_number_or(g, "elitism", s.ga.elitism, "ga"));
    s.ga.penalty_lambda =
        detail::get_number_or(g, "penalty_lambda", s.ga.penalty_lambda, "ga");
    if (g.contains("parallel")) {
      if (!g.at("parallel").is_boolean()) throw ParseError("ga.parallel: must be a boolean");
      s.ga.parallel = g.at("parallel").get<bool>();
    }
  }

  if (j.contains("sa")) {
    const ordered_json& a = j.at("sa");
    detail::check_keys(a, {"initial_temperature", "cooling", "iterations"}, "sa");
    s.sa.initial_temperature =
        detail::get_number_or(a, "initial_temperature", s.sa.initial_temperature, "sa");
    s.sa.cooling = detail::get_number_or(a, "cooling", s.sa.cooling, "sa");
    s.sa.iterations =
        static_cast<int>(detail::get_number_or(a, "iterations", s.sa.iterations, "sa"));
  }

  if (j.contains("qoe")) {
    const ordered_json& q = j.at("qoe");
    detail::check_keys(q, {"w_quality", "w_rebuffer", "w_switch", "w_startup", "startup_cap_s"},
                       "qoe");
    s.qoe.w_quality = detail::get_number_or(q, "w_quality", s.qoe.w_quality, "qoe");
    s.qoe.w_rebuffer = detail::get_number_or(q, "w_rebuffer", s.qoe.w_rebuffer, "qoe");
    s.qoe.w_switch = detail::get_number_or(q, "w_switch", s.qoe.w_switch, "qoe");
    s.qoe.w_startup = detail::get_number_or(q, "w_startup", s.qoe.w_startup, "qoe");
    s.qoe.startup_cap_s = detail::get_number_or(q, "startup_cap_s", s.qoe.startup_cap_s, "qoe");
  }

  return validate(std::move(s));
}

inline Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

/// Effective-configuration echo: serializing and re-parsing reproduces the
/// same scenario. Keys are emitted in a fixed order.
inline ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["name"] = s.name;
  j["demand"] = s.demand;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["tick_s"] = s.tick_s;
  j["epoch_s"] = s.epoch_s;
  j["method"] = to_string(s.method);
  j["optimizer"] = to_string(s.optimizer);

  ordered_json topo;
  topo["server"] = s.server_node;
  topo["nodes"] = s.nodes;
  topo["links"] = ordered_json::array();
  for (const Link& l : s.links) {
    ordered_json lj;
    lj["id"] = l.id;
    lj["src"] = l.src;
    lj["dst"] = l.dst;
    lj["capacity_bps"] = l.capacity_bps;
    lj["latency_ms"] = l.latency_ms;
    lj["base_loss"] = l.base_loss;
    if (l.variability) {
      lj["variability"] = {{"good_multiplier", l.variability->good_multiplier},
                           {"bad_multiplier", l.variability->bad_multiplier},
                           {"p_good_to_bad", l.variability->p_good_to_bad},
                           {"p_bad_to_good", l.variability->p_bad_to_good}};
    }
    topo["links"].push_back(std::move(lj));
  }
  j["topology"] = std::move(topo);

  j["assets"] = ordered_json::array();
  for (const VideoAsset& a : s.assets) {
    ordered_json aj;
    aj["id"] = a.id;
    aj["duration_s"] = a.duration_s;
    aj["segment_s"] = a.segment_s;
    aj["ladder"] = ordered_json::array();
    for (const Tier& t : a.ladder.tiers)
      aj["ladder"].push_back({{"bitrate_bps", t.bitrate_bps}, {"quality", t.quality}});
    j["assets"].push_back(std::move(aj));
  }

  j["groups"] = ordered_json::array();
  for (const GroupDef& g : s.groups)
    j["groups"].push_back({{"id", g.id}, {"asset", g.asset}});

  j["schedule"] = ordered_json::array();
  for (const ScheduleEvent& e : s.schedule) {
    ordered_json ej;
    ej["t"] = e.t;
    ej["event"] = e.kind == ScheduleEvent::Kind::join ? "join" : "leave";
    ej["client"] = e.client;
    ej["group"] = e.group;
    if (e.kind == ScheduleEvent::Kind::join) ej["node"] = e.node;
    j["schedule"].push_back(std::move(ej));
  }

  j["params"] = {{"startup_threshold_s", s.params.startup_threshold_s},
                 {"resume_threshold_s", s.params.resume_threshold_s},
                 {"buffer_cap_s", s.params.buffer_cap_s},
                 {"low_water_s", s.params.low_water_s},
                 {"safety", s.params.safety},
                 {"alpha", s.params.alpha},
                 {"goodput_window", s.params.goodput_window},
                 {"headroom", s.params.headroom},
                 {"fec_cap", s.params.fec_cap}};
  j["ga"] = {{"population", s.ga.population},
             {"generations", s.ga.generations},
             {"tournament", s.ga.tournament},
             {"crossover_prob", s.ga.crossover_prob},
             {"mutation_prob", s.ga.mutation_prob},
             {"elitism", s.ga.elitism},
             {"penalty_lambda", s.ga.penalty_lambda},
             {"parallel", s.ga.parallel}};
  j["sa"] = {{"initial_temperature", s.sa.initial_temperature},
             {"cooling", s.sa.cooling},
             {"iterations", s.sa.iterations}};
  j["qoe"] = {{"w_quality", s.qoe.w_quality},
              {"w_rebuffer", s.qoe.w_rebuffer},
              {"w_switch", s.qoe.w_switch},
              {"w_startup", s.qoe.w_startup},
              {"startup_cap_s", s.qoe.startup_cap_s}};
  return j;
}

} // namespace mcast
