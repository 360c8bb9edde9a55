// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"
#include "hydra/dispatch.hpp"
#include "hydra/packing.hpp"
#include "hydra/scheme.hpp"

namespace hydra {

struct PlanOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  std::size_t exact_dispatch_cutoff = 10;  // exact dispatch when B <= cutoff
  std::uint64_t dispatch_node_budget = 2'000'000;
  PackOptions pack;
  bool reject_empty_pipelines = false;
};

/// Dispatch + per-pipeline packing of one mini-batch under one strategy.
struct StrategyPlan {
  Strategy strategy;  // terms ordered by descending MaxLen; pipeline j is strategy.pipelines()[j]
  DispatchPlan dispatch;
  std::vector<std::vector<int>> members;  // pipeline -> sequence indices, ascending
  std::vector<PackingPlan> packings;      // indexed like members; assignment is over members[j]
  Seconds estimated_latency = 0;
  std::string dispatch_method;  // "exact" or "greedy"

  std::vector<Tokens> pipeline_tokens;
  std::vector<int> microbatch_counts;
  std::vector<bool> empty_pipelines;

  bool has_empty_pipeline() const {
    return std::find(empty_pipelines.begin(), empty_pipelines.end(), true) != empty_pipelines.end();
  }
};

/// Pipelines in dispatch order for a strategy sorted by descending MaxLen.
inline std::vector<SchemeCost> sorted_pipelines(const Strategy& sorted, const CostProfile& profile) {
  return profile.pipeline_costs(sorted);
}

inline StrategyPlan plan_strategy(const std::vector<Tokens>& lengths, const Strategy& strategy,
                                  const CostProfile& profile, const PlanOptions& options = {}) {
  const auto report = validate_strategy(strategy, profile.hardware().n_gpus, static_cast<int>(profile.shape().layers));
  if (!report.ok()) throw InvalidArgument("invalid strategy " + strategy.to_string() + ": " + report.to_string());
  StrategyPlan plan;
  plan.strategy = sort_by_max_len(canonical(strategy), profile);
  const auto pipes = sorted_pipelines(plan.strategy, profile);
  for (const auto& p : pipes)
    if (p.max_len < 1) throw InfeasibleError("scheme " + p.scheme.to_string() + " cannot hold any activations");
  Tokens longest = 0;
  for (Tokens l : lengths) longest = std::max(longest, l);
  if (!lengths.empty() && longest > pipes.front().max_len)
    throw InfeasibleError("strategy " + plan.strategy.to_string() + ": longest sequence " + std::to_string(longest) +
                          " exceeds the largest MaxLen " + std::to_string(pipes.front().max_len));

  plan.dispatch = dispatch_greedy(lengths, pipes, options.trials, options.seed);
  plan.dispatch_method = "greedy";
  if (lengths.size() <= options.exact_dispatch_cutoff) {
    auto exact = dispatch_exact(lengths, pipes, options.dispatch_node_budget);
    if (exact.objective < plan.dispatch.objective) {
      plan.dispatch = std::move(exact);
      plan.dispatch_method = "exact";
    }
  }

  const std::size_t d = pipes.size();
  plan.members.assign(d, {});
  for (std::size_t i = 0; i < lengths.size(); ++i)
    plan.members[static_cast<std::size_t>(plan.dispatch.assignment[i])].push_back(static_cast<int>(i));
  plan.packings.resize(d);
  plan.estimated_latency = 0;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<Tokens> sub;
    for (int i : plan.members[j]) sub.push_back(lengths[static_cast<std::size_t>(i)]);
    plan.packings[j] = pack(sub, pipes[j], options.pack);
    plan.estimated_latency = std::max(plan.estimated_latency, plan.packings[j].objective);
    Tokens tok = 0;
    for (Tokens l : sub) tok += l;
    plan.pipeline_tokens.push_back(tok);
    plan.microbatch_counts.push_back(plan.packings[j].v);
    plan.empty_pipelines.push_back(sub.empty());
  }
  if (options.reject_empty_pipelines && plan.has_empty_pipeline())
    throw InfeasibleError("strategy " + plan.strategy.to_string() + " leaves a pipeline without sequences");
  return plan;
}

/// Checks every StrategyPlan invariant against the mini-batch; empty when all hold.
inline std::vector<std::string> audit_plan(const StrategyPlan& plan, const std::vector<Tokens>& lengths,
                                           const CostProfile& profile) {
  std::vector<std::string> bad;
  const auto pipes = sorted_pipelines(plan.strategy, profile);
  for (auto& s : audit_dispatch(plan.dispatch, lengths, pipes)) bad.push_back("dispatch: " + s);
  if (plan.members.size() != pipes.size() || plan.packings.size() != pipes.size()) {
    bad.push_back("pipeline count mismatch");
    return bad;
  }
  std::vector<int> seen(lengths.size(), 0);
  Seconds mx = 0;
  for (std::size_t j = 0; j < pipes.size(); ++j) {
    std::vector<Tokens> sub;
    for (int i : plan.members[j]) {
      if (i < 0 || static_cast<std::size_t>(i) >= lengths.size()) {
        bad.push_back("pipeline " + std::to_string(j) + " lists an invalid sequence");
        continue;
      }
      ++seen[static_cast<std::size_t>(i)];
      if (plan.dispatch.assignment[static_cast<std::size_t>(i)] != static_cast<int>(j))
        bad.push_back("sequence " + std::to_string(i) + " packed on a pipeline it was not dispatched to");
      sub.push_back(lengths[static_cast<std::size_t>(i)]);
    }
    for (auto& s : audit_packing(plan.packings[j], sub, pipes[j]))
      bad.push_back("pipeline " + std::to_string(j) + ": " + s);
    mx = std::max(mx, plan.packings[j].objective);
  }
  for (std::size_t i = 0; i < lengths.size(); ++i)
    if (seen[i] != 1) bad.push_back("sequence " + std::to_string(i) + " appears " + std::to_string(seen[i]) + " times");
  if (mx != plan.estimated_latency) bad.push_back("estimated latency differs from max packing objective");
  if (plan.dispatch.objective > plan.estimated_latency)
    bad.push_back("dispatch bound exceeds the packed estimate");
  return bad;
}

struct CandidateReport {
  std::string strategy;
  int gpus = 0;
  bool feasible = false;
  Seconds estimated_latency = kInfinity;
  std::string reason;  // infeasibility reason
  bool has_empty_pipeline = false;
};

struct Selection {
  std::size_t best_index = 0;  // into the candidate list
  StrategyPlan best;
  std::vector<CandidateReport> report;
};

/// Plans every candidate (in parallel) and keeps the fastest; ties go to fewer
/// GPUs, then to the lexicographically smaller strategy text.
inline Selection select_strategy(const std::vector<Tokens>& lengths, const std::vector<Strategy>& candidates,
                                 const CostProfile& profile, const PlanOptions& options = {}) {
  if (candidates.empty()) throw InvalidArgument("select_strategy: no candidates");
  std::vector<std::optional<StrategyPlan>> plans(candidates.size());
  std::vector<CandidateReport> report(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    auto& r = report[c];
    r.strategy = candidates[c].to_string();
    r.gpus = candidates[c].total_gpus();
    try {
      plans[c] = plan_strategy(lengths, candidates[c], profile, options);
      r.feasible = true;
      r.estimated_latency = plans[c]->estimated_latency;
      r.has_empty_pipeline = plans[c]->has_empty_pipeline();
    } catch (const InfeasibleError& e) {
      r.reason = e.what();
    }
  });
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (!plans[c]) continue;
    if (!best) {
      best = c;
      continue;
    }
    const auto& a = report[c];
    const auto& b = report[*best];
    if (a.estimated_latency != b.estimated_latency) {
      if (a.estimated_latency < b.estimated_latency) best = c;
    } else if (a.gpus != b.gpus) {
      if (a.gpus < b.gpus) best = c;
    } else if (a.strategy < b.strategy) {
      best = c;
    }
  }
  if (!best) {
    std::string why;
    for (const auto& r : report) why += "\n  " + r.strategy + ": " + r.reason;
    throw InfeasibleError("no candidate strategy can serve the mini-batch:" + why);
  }
  Selection s;
  s.best_index = *best;
  s.best = std::move(*plans[*best]);
  s.report = std::move(report);
  return s;
}

}  // namespace hydra
