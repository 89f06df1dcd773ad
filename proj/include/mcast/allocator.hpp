#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mcast/content.hpp"
#include "mcast/errors.hpp"
#include "mcast/rng.hpp"
#include "mcast/types.hpp"

namespace mcast {

/// One group as the allocator sees it: audience size, encoding ladder, the
/// links its stream occupies, and its current redundancy overhead.
struct ProblemGroup {
  GroupId id;
  int member_count = 0;
  const BitrateLadder* ladder = nullptr;
  std::set<LinkId> tree_links;
  double fec_fraction = 0;
};

/// The per-epoch allocation problem: pick one tier per group so that every
/// link stays within headroom * predicted capacity, maximizing
/// member-weighted quality. A tree-coupled multiple-choice knapsack.
struct AllocationProblem {
  std::vector<ProblemGroup> groups; // sorted by group id
  std::map<LinkId, double> predicted_capacity_bps;
  double headroom = 0.95;

  const ProblemGroup& group(const GroupId& id) const {
    for (const ProblemGroup& g : groups)
      if (g.id == id) return g;
    throw StateError("unknown group in problem: " + id);
  }
};

using AllocationPlan = std::map<GroupId, int>;

struct GaParams {
  int population = 64;
  int generations = 50;
  int tournament = 2;
  double crossover_prob = 0.5;
  double mutation_prob = -1; // < 0 means 1/G
  int elitism = 1;
  double penalty_lambda = 10.0;
  bool parallel = false;

  void validate() const {
    if (population < 2) throw ConfigError("ga: population must be >= 2");
    if (generations < 1) throw ConfigError("ga: generations must be >= 1");
    if (tournament < 1) throw ConfigError("ga: tournament size must be >= 1");
    if (crossover_prob < 0 || crossover_prob > 1)
      throw ConfigError("ga: crossover probability must be in [0, 1]");
    if (mutation_prob > 1) throw ConfigError("ga: mutation probability must be <= 1");
    if (elitism < 0 || elitism >= population)
      throw ConfigError("ga: elitism must be in [0, population)");
    if (!(penalty_lambda > 0)) throw ConfigError("ga: penalty lambda must be > 0");
  }
};

struct SaParams {
  double initial_temperature = 1.0;
  double cooling = 0.95;
  int iterations = 500;

  void validate() const {
    if (!(initial_temperature > 0)) throw ConfigError("sa: T0 must be > 0");
    if (!(cooling > 0) || cooling >= 1) throw ConfigError("sa: cooling must be in (0, 1)");
    if (iterations < 0) throw ConfigError("sa: iterations must be >= 0");
  }
};

struct Evaluation {
  double value = 0;
  double max_violation_bps = 0;

  bool feasible() const { return max_violation_bps <= 0; }
};

namespace detail {

inline std::map<LinkId, double> plan_loads(const AllocationProblem& p,
                                           const AllocationPlan& plan) {
  std::map<LinkId, double> loads;
  for (const auto& [l, cap] : p.predicted_capacity_bps) loads[l] = 0.0;
  for (const ProblemGroup& g : p.groups) {
    auto it = plan.find(g.id);
    if (it == plan.end()) throw StateError("plan missing group " + g.id);
    const double rate = g.ladder->tier(it->second).bitrate_bps * (1.0 + g.fec_fraction);
    for (const LinkId& l : g.tree_links) {
      auto pos = loads.find(l);
      if (pos == loads.end())
        throw StateError("group " + g.id + " uses link " + l + " with no predicted capacity");
      pos->second += rate;
    }
  }
  return loads;
}

inline std::vector<int> tier_counts(const AllocationProblem& p) {
  std::vector<int> counts;
  counts.reserve(p.groups.size());
  for (const ProblemGroup& g : p.groups) counts.push_back(g.ladder->size());
  return counts;
}

inline AllocationPlan from_genes(const AllocationProblem& p, const std::vector<int>& genes) {
  AllocationPlan plan;
  for (std::size_t i = 0; i < p.groups.size(); ++i) plan[p.groups[i].id] = genes[i];
  return plan;
}

} // namespace detail

/// Pure objective evaluation: member-weighted quality, plus the worst
/// per-link capacity violation (0 when feasible).
inline Evaluation evaluate(const AllocationProblem& p, const AllocationPlan& plan) {
  if (plan.size() != p.groups.size())
    throw StateError("plan covers " + std::to_string(plan.size()) + " groups, expected " +
                     std::to_string(p.groups.size()));
  Evaluation e;
  for (const ProblemGroup& g : p.groups) {
    const int tier = plan.at(g.id);
    e.value += static_cast<double>(g.member_count) * g.ladder->tier(tier).quality;
  }
  const std::map<LinkId, double> loads = detail::plan_loads(p, plan);
  for (const auto& [l, load] : loads) {
    const double budget = p.headroom * p.predicted_capacity_bps.at(l);
    e.max_violation_bps = std::max(e.max_violation_bps, load - budget);
  }
  e.max_violation_bps = std::max(e.max_violation_bps, 0.0);
  return e;
}

inline AllocationPlan all_lowest(const AllocationProblem& p) {
  AllocationPlan plan;
  for (const ProblemGroup& g : p.groups) plan[g.id] = 0;
  return plan;
}

/// Marginal-efficiency greedy: start everyone at the lowest tier and apply
/// the feasible single-tier upgrade with the best quality gain per added
/// bit (summed over the group's tree) until none remains.
inline AllocationPlan greedy_allocate(const AllocationProblem& p) {
  AllocationPlan plan = all_lowest(p);
  if (p.groups.empty()) return plan;
  if (!evaluate(p, plan).feasible())
    throw InfeasibleError("all-lowest plan exceeds link budgets");

  std::map<LinkId, double> loads = detail::plan_loads(p, plan);
  while (true) {
    double best_score = -1.0;
    const ProblemGroup* best_group = nullptr;
    for (const ProblemGroup& g : p.groups) {
      const int tier = plan.at(g.id);
      if (tier >= g.ladder->top()) continue;
      const Tier& cur = g.ladder->tier(tier);
      const Tier& up = g.ladder->tier(tier + 1);
      const double added = (up.bitrate_bps - cur.bitrate_bps) * (1.0 + g.fec_fraction);

      bool fits = true;
      for (const LinkId& l : g.tree_links) {
        if (loads.at(l) + added > p.headroom * p.predicted_capacity_bps.at(l)) {
          fits = false;
          break;
        }
      }
      if (!fits) continue;

      const double gain = static_cast<double>(g.member_count) * (up.quality - cur.quality);
      const double total_bits = added * static_cast<double>(g.tree_links.size());
      const double score = total_bits > 0 ? gain / total_bits
                                          : std::numeric_limits<double>::infinity();
      if (score > best_score) { // strict: ties keep the earlier (lower) group id
        best_score = score;
        best_group = &g;
      }
    }
    if (!best_group) break;

    const int tier = plan.at(best_group->id);
    const double added = (best_group->ladder->tier(tier + 1).bitrate_bps -
                          best_group->ladder->tier(tier).bitrate_bps) *
                         (1.0 + best_group->fec_fraction);
    for (const LinkId& l : best_group->tree_links) loads.at(l) += added;
    plan.at(best_group->id) = tier + 1;
  }
  return plan;
}

/// Restores feasibility by repeatedly downgrading, on the most violated
/// link, the group whose downgrade removes the most bits from it.
inline AllocationPlan repair(const AllocationProblem& p, AllocationPlan plan) {
  std::map<LinkId, double> loads = detail::plan_loads(p, plan);
  while (true) {
    LinkId worst;
    double worst_violation = 0;
    for (const auto& [l, load] : loads) {
      const double v = load - p.headroom * p.predicted_capacity_bps.at(l);
      if (v > worst_violation) { // ties keep the lexicographically smaller link
        worst_violation = v;
        worst = l;
      }
    }
    if (worst_violation <= 0) return plan;

    const ProblemGroup* pick = nullptr;
    double pick_reduction = 0;
    for (const ProblemGroup& g : p.groups) {
      const int tier = plan.at(g.id);
      if (tier == 0 || !g.tree_links.count(worst)) continue;
      const double reduction = (g.ladder->tier(tier).bitrate_bps -
                                g.ladder->tier(tier - 1).bitrate_bps) *
                               (1.0 + g.fec_fraction);
      if (reduction > pick_reduction) { // strict: ties keep the lower group id
        pick_reduction = reduction;
        pick = &g;
      }
    }
    if (!pick)
      throw StateError("repair stuck: link " + worst +
                       " violated with every group at its lowest tier");
    for (const LinkId& l : pick->tree_links) loads.at(l) -= pick_reduction;
    plan.at(pick->id) -= 1;
  }
}

/// Genetic search over tier vectors with tournament selection, uniform
/// crossover, per-gene mutation and elitism. Fitness penalizes capacity
/// violations; the best individual ever seen is repaired before returning.
/// Fully deterministic for a fixed seed, including under parallel fitness
/// evaluation (results are consumed in individual order).
inline AllocationPlan ga_allocate(const AllocationProblem& p, const GaParams& params,
                                  std::uint64_t seed) {
  params.validate();
  if (p.groups.empty()) return {};
  if (!evaluate(p, all_lowest(p)).feasible())
    throw InfeasibleError("all-lowest plan exceeds link budgets");

  const std::size_t n_groups = p.groups.size();
  const std::vector<int> counts = detail::tier_counts(p);
  const double p_mut = params.mutation_prob >= 0
                           ? params.mutation_prob
                           : 1.0 / static_cast<double>(n_groups);
  Rng rng(seed);

  auto fitness_of = [&](const std::vector<int>& genes) {
    const Evaluation e = evaluate(p, detail::from_genes(p, genes));
    return e.value - params.penalty_lambda * e.max_violation_bps;
  };

  std::vector<std::vector<int>> pop(static_cast<std::size_t>(params.population));
  pop[0].assign(n_groups, 0); // a feasible ancestor
  for (std::size_t i = 1; i < pop.size(); ++i) {
    pop[i].resize(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) pop[i][g] = rng.uniform_int(counts[g]);
  }

  std::vector<double> fit(pop.size());
  auto evaluate_population = [&]() {
    if (!params.parallel) {
      for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = fitness_of(pop[i]);
      return;
    }
    const unsigned workers = std::max(2u, std::thread::hardware_concurrency());
    const std::size_t chunk = (pop.size() + workers - 1) / workers;
    std::vector<std::future<void>> tasks;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(pop.size(), lo + chunk);
      if (lo >= hi) break;
      tasks.push_back(std::async(std::launch::async, [&, lo, hi]() {
        for (std::size_t i = lo; i < hi; ++i) fit[i] = fitness_of(pop[i]);
      }));
    }
    for (auto& t : tasks) t.get();
  };

  std::vector<int> best_genes;
  double best_fit = -std::numeric_limits<double>::infinity();

  auto tournament_pick = [&]() -> const std::vector<int>& {
    int winner = rng.uniform_int(params.population);
    for (int k = 1; k < params.tournament; ++k) {
      const int challenger = rng.uniform_int(params.population);
      if (fit[static_cast<std::size_t>(challenger)] >
          fit[static_cast<std::size_t>(winner)])
        winner = challenger;
    }
    return pop[static_cast<std::size_t>(winner)];
  };

  for (int gen = 0; gen < params.generations; ++gen) {
    evaluate_population();
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (fit[i] > best_fit) {
        best_fit = fit[i];
        best_genes = pop[i];
      }
    }

    // Rank indices by fitness, ties by lower index, for elitism.
    std::vector<std::size_t> order(pop.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });

    std::vector<std::vector<int>> next;
    next.reserve(pop.size());
    for (int e = 0; e < params.elitism; ++e)
      next.push_back(pop[order[static_cast<std::size_t>(e)]]);

    while (next.size() < pop.size()) {
      std::vector<int> child = tournament_pick();
      if (rng.uniform01() < params.crossover_prob) {
        const std::vector<int>& other = tournament_pick();
        for (std::size_t g = 0; g < n_groups; ++g)
          if (rng.uniform01() < 0.5) child[g] = other[g];
      }
      for (std::size_t g = 0; g < n_groups; ++g)
        if (rng.uniform01() < p_mut) child[g] = rng.uniform_int(counts[g]);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
  }

  evaluate_population();
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (fit[i] > best_fit) {
      best_fit = fit[i];
      best_genes = pop[i];
    }
  }
  return repair(p, detail::from_genes(p, best_genes));
}

/// Simulated annealing from the greedy plan: single-tier random moves,
/// infeasible neighbors rejected outright, worse moves accepted with
/// probability exp(-loss/T) under geometric cooling. Returns the best
/// feasible plan visited, so the result never falls below greedy's value.
inline AllocationPlan sa_allocate(const AllocationProblem& p, const SaParams& params,
                                  std::uint64_t seed) {
  params.validate();
  if (p.groups.empty()) return {};

  AllocationPlan current = greedy_allocate(p); // throws InfeasibleError if unsolvable
  double current_value = evaluate(p, current).value;
  AllocationPlan best = current;
  double best_value = current_value;

  Rng rng(seed);
  double temperature = params.initial_temperature;
  for (int i = 0; i < params.iterations; ++i, temperature *= params.cooling) {
    const ProblemGroup& g =
        p.groups[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(p.groups.size())))];
    const int delta = rng.uniform01() < 0.5 ? -1 : 1;
    const int tier = current.at(g.id) + delta;
    if (tier < 0 || tier > g.ladder->top()) continue;

    AllocationPlan neighbor = current;
    neighbor.at(g.id) = tier;
    const Evaluation e = evaluate(p, neighbor);
    if (!e.feasible()) continue;

    const double gain = e.value - current_value;
    if (gain < 0 && rng.uniform01() >= std::exp(gain / temperature)) continue;

    current = std::move(neighbor);
    current_value = e.value;
    if (current_value > best_value) {
      best_value = current_value;
      best = current;
    }
  }
  return best;
}

/// Test oracle: enumerate every plan (guarded) and return the feasible
/// maximum, ties resolved to the lexicographically smallest tier vector.
inline AllocationPlan exhaustive_allocate(const AllocationProblem& p) {
  if (p.groups.empty()) return {};
  const std::vector<int> counts = detail::tier_counts(p);
  double space = 1;
  for (int c : counts) space *= static_cast<double>(c);
  if (space > 1e6)
    throw OracleError("search space of " + std::to_string(static_cast<long long>(space)) +
                      " plans exceeds the 1e6 enumeration guard");

  std::vector<int> genes(p.groups.size(), 0);
  std::optional<std::vector<int>> best;
  double best_value = -std::numeric_limits<double>::infinity();
  while (true) {
    const Evaluation e = evaluate(p, detail::from_genes(p, genes));
    if (e.feasible() && e.value > best_value) { // strict keeps lexicographic first
      best_value = e.value;
      best = genes;
    }
    // Odometer increment, least-significant gene last.
    std::size_t i = genes.size();
    while (i > 0) {
      --i;
      if (++genes[i] < counts[i]) break;
      genes[i] = 0;
      if (i == 0) {
        if (!best) throw InfeasibleError("no feasible plan exists");
        return detail::from_genes(p, *best);
      }
    }
  }
}

/// The static baseline: every group at its top tier, no feasibility check.
/// Congestion shows up downstream as loss and rebuffering.
inline AllocationPlan traditional_allocate(const AllocationProblem& p) {
  AllocationPlan plan;
  for (const ProblemGroup& g : p.groups) plan[g.id] = g.ladder->top();
  return plan;
}

// ---- predictors ------------------------------------------------------

/// EWMA over a sample sequence, seeded with the first sample.
template <typename Range>
inline double ewma(const Range& samples, double alpha) {
  if (!(alpha > 0) || alpha > 1) throw ConfigError("ewma: alpha must be in (0, 1]");
  bool first = true;
  double value = 0;
  for (double x : samples) {
    value = first ? x : alpha * x + (1.0 - alpha) * value;
    first = false;
  }
  if (first) throw StateError("ewma: empty sample sequence");
  return value;
}

/// Per-link capacity prediction: EWMA of effective-capacity samples, falling
/// back to nominal capacity for links with no history yet.
inline std::map<LinkId, double> predict_capacity(
    const std::map<LinkId, std::vector<double>>& history, double alpha,
    const std::map<LinkId, double>& nominal) {
  std::map<LinkId, double> predicted;
  for (const auto& [l, cap] : nominal) {
    auto it = history.find(l);
    predicted[l] = (it == history.end() || it->second.empty()) ? cap
                                                               : ewma(it->second, alpha);
  }
  return predicted;
}

/// Streaming form of the same recurrence, used by the engine.
struct EwmaState {
  std::optional<double> value;

  void observe(double x, double alpha) {
    value = value ? alpha * x + (1.0 - alpha) * *value : x;
  }
};

/// Harmonic mean of the recent goodput window; 0 on an empty window
/// (cold start).
template <typename Range>
inline double predict_client_goodput(const Range& window) {
  double inv_sum = 0;
  std::size_t n = 0;
  for (double s : window) {
    if (!(s > 0)) return 0; // a zero sample means nothing got through
    inv_sum += 1.0 / s;
    ++n;
  }
  if (n == 0) return 0;
  return static_cast<double>(n) / inv_sum;
}

// ---- quality adaptation guardrails -----------------------------------

/// Per-group digest of member feedback for the adaptation guardrails.
struct GroupFeedback {
  double min_buffer_s = std::numeric_limits<double>::infinity();
  double min_predicted_goodput_bps = std::numeric_limits<double>::infinity();
  bool has_goodput = false; // false while every member is cold-starting
  double max_loss = 0;
};

/// Applies the client-side guardrails to an optimizer plan:
///   (a) a member under the low-water buffer mark forces a step down,
///   (b) the group bitrate may not exceed safety * slowest member's
///       predicted goodput (cold-start members carry no vote),
///   (c) tier changes are smoothed to one step per epoch.
/// Smoothing is applied first; the caps win when they conflict, so an
/// emergency downgrade may exceed one step.
inline AllocationPlan adapt_quality(const AllocationProblem& p,
                                    const AllocationPlan& optimized,
                                    const AllocationPlan& previous,
                                    const std::map<GroupId, GroupFeedback>& fb,
                                    double safety, double low_water_s) {
  AllocationPlan plan;
  for (const ProblemGroup& g : p.groups) {
    const int prev = previous.count(g.id) ? previous.at(g.id) : 0;
    int tier = std::clamp(optimized.at(g.id), prev - 1, prev + 1);

    auto it = fb.find(g.id);
    if (it != fb.end()) {
      const GroupFeedback& f = it->second;
      // Strictly below the mark: buffers plateau exactly at the startup
      // threshold under balanced fluid delivery, which must not trigger.
      if (f.min_buffer_s < low_water_s - 1e-9) tier = std::min(tier, prev - 1);
      if (f.has_goodput) {
        int cap = 0;
        for (int t = 0; t <= g.ladder->top(); ++t)
          if (g.ladder->tier(t).bitrate_bps <= safety * f.min_predicted_goodput_bps)
            cap = t;
          else
            break;
        tier = std::min(tier, cap);
      }
    }
    plan[g.id] = std::max(tier, 0);
  }
  return plan;
}

/// Redundancy sized to observed loss: twice the loss rate, capped.
inline double fec_fraction_for_loss(double observed_loss, double fec_cap = 0.3) {
  const double loss = std::clamp(observed_loss, 0.0, 1.0);
  return std::min(2.0 * loss, fec_cap);
}

} // namespace mcast
