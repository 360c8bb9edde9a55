// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hydra/comm_plan.hpp"
#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"
#include "hydra/packing.hpp"
#include "hydra/planner.hpp"

namespace hydra {

enum class OverlapMode { kNone, kFull };

struct SimConfig {
  double forward_fraction = 1.0 / 3.0;
  OverlapMode overlap = OverlapMode::kFull;
  double local_seconds_per_byte = 0;  // non-overlappable cost of local moves
};

struct ScheduleOp {
  int stage = 0;
  int microbatch = 0;
  bool forward = true;
  Seconds start = 0;
  Seconds end = 0;
};

struct PipelineSim {
  Seconds latency = 0;
  double bubble_fraction = 0;
  std::vector<ScheduleOp> timeline;  // per stage in execution order, stages ascending
};

/// Per-stage 1F1B order: min(pp - s - 1, V) warm-up forwards, then F/B pairs,
/// then the remaining backwards. Entries are (microbatch, forward).
inline std::vector<std::pair<int, bool>> one_f_one_b_order(int pp, int stage, int v) {
  const int warm = std::min(pp - stage - 1, v);
  std::vector<std::pair<int, bool>> order;
  int f = 0, b = 0;
  for (; f < warm; ++f) order.push_back({f, true});
  while (f < v) {
    order.push_back({f++, true});
    order.push_back({b++, false});
  }
  while (b < v) order.push_back({b++, false});
  return order;
}

/// List-schedules 1F1B: each stage runs its ops in order, an op starts when the
/// stage is free and its dependency finished (forward on s-1, backward on s+1;
/// the last stage's backward waits for its own forward).
inline PipelineSim simulate_pipeline(const std::vector<Seconds>& times, int pp, const SimConfig& cfg = {}) {
  if (times.empty()) throw InvalidArgument("simulate_pipeline: no micro-batches");
  if (pp < 1) throw InvalidArgument("simulate_pipeline: pp must be >= 1");
  if (!(cfg.forward_fraction > 0 && cfg.forward_fraction < 1))
    throw InvalidArgument("simulate_pipeline: forward_fraction must be in (0, 1)");
  const int v = static_cast<int>(times.size());
  std::vector<std::vector<std::pair<int, bool>>> order(static_cast<std::size_t>(pp));
  for (int s = 0; s < pp; ++s) order[static_cast<std::size_t>(s)] = one_f_one_b_order(pp, s, v);
  // done[s][j][forward?]: completion time, negative when not yet run.
  std::vector<std::vector<std::array<Seconds, 2>>> done(
      static_cast<std::size_t>(pp), std::vector<std::array<Seconds, 2>>(static_cast<std::size_t>(v), {-1.0, -1.0}));
  std::vector<std::size_t> next(static_cast<std::size_t>(pp), 0);
  std::vector<Seconds> free_at(static_cast<std::size_t>(pp), 0);
  std::vector<std::vector<ScheduleOp>> per_stage(static_cast<std::size_t>(pp));
  std::size_t remaining = static_cast<std::size_t>(pp) * static_cast<std::size_t>(2 * v);
  while (remaining > 0) {
    bool progressed = false;
    for (int s = 0; s < pp; ++s) {
      auto& nx = next[static_cast<std::size_t>(s)];
      while (nx < order[static_cast<std::size_t>(s)].size()) {
        const auto [j, fwd] = order[static_cast<std::size_t>(s)][nx];
        Seconds ready;
        if (fwd) {
          ready = s == 0 ? 0 : done[static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(j)][1];
        } else {
          ready = s == pp - 1 ? done[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)][1]
                              : done[static_cast<std::size_t>(s + 1)][static_cast<std::size_t>(j)][0];
        }
        if (ready < 0) break;
        const Seconds t = times[static_cast<std::size_t>(j)];
        const Seconds dur = fwd ? cfg.forward_fraction * t : t - cfg.forward_fraction * t;
        const Seconds start = std::max(ready, free_at[static_cast<std::size_t>(s)]);
        const Seconds end = start + dur;
        free_at[static_cast<std::size_t>(s)] = end;
        done[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)][fwd ? 1 : 0] = end;
        per_stage[static_cast<std::size_t>(s)].push_back({s, j, fwd, start, end});
        ++nx;
        --remaining;
        progressed = true;
      }
    }
    if (!progressed) throw Error("simulate_pipeline: schedule deadlock");
  }
  PipelineSim out;
  out.latency = done[0][static_cast<std::size_t>(v - 1)][0];
  for (int j = 0; j < v; ++j) out.latency = std::max(out.latency, done[0][static_cast<std::size_t>(j)][0]);
  Seconds busy = 0;
  for (Seconds t : times) busy += t;
  out.bubble_fraction = out.latency > 0 ? std::max(0.0, 1.0 - busy / out.latency) : 0.0;
  for (auto& st : per_stage)
    for (auto& op : st) out.timeline.push_back(op);
  return out;
}

struct CommSeconds {
  Seconds pull_network = 0;
  Seconds pull_local = 0;
  Seconds push_network = 0;
  Seconds push_local = 0;

  Seconds pull() const { return pull_network + pull_local; }
  Seconds push() const { return push_network + push_local; }
};

/// Per-GPU max of max(sent, received) / B; local moves priced per byte.
inline CommSeconds comm_seconds(const CommPlan& pull, const CommPlan& push, double param_bytes, double bandwidth,
                                const SimConfig& cfg) {
  CommSeconds c;
  for (const auto& v : volumes(pull, param_bytes)) {
    c.pull_network = std::max(c.pull_network, std::max(v.sent, v.received) / bandwidth);
    c.pull_local = std::max(c.pull_local, v.local * cfg.local_seconds_per_byte);
  }
  for (const auto& v : volumes(push, param_bytes)) {
    c.push_network = std::max(c.push_network, std::max(v.sent + v.rs_sent, v.received + v.rs_received) / bandwidth);
    c.push_local = std::max(c.push_local, v.local * cfg.local_seconds_per_byte);
  }
  return c;
}

struct PipelineReport {
  Seconds simulated = 0;
  Seconds estimated = 0;
  double bubble_fraction = 0;
  double estimate_delta = 0;  // (simulated - estimated) / estimated, 0 for an empty pipeline
  std::vector<Seconds> microbatch_times;
  std::vector<ScheduleOp> timeline;
};

struct SimReport {
  std::string strategy;
  std::vector<PipelineReport> per_pipeline;
  Seconds propagation = 0;
  CommSeconds comm;
  Seconds comm_after_overlap = 0;  // iteration - propagation
  Seconds iteration_latency = 0;
  Seconds estimated_latency = 0;
};

/// Iteration latency from pipeline schedules plus optional pull/push.
inline Seconds assemble_iteration(Seconds propagation, const CommSeconds& c, OverlapMode mode) {
  if (mode == OverlapMode::kNone) return c.pull() + propagation + c.push();
  return std::max(propagation, c.pull_network + c.push_network) + c.pull_local + c.push_local;
}

inline SimReport simulate_strategy(const StrategyPlan& plan, const CommPlan* pull, const CommPlan* push,
                                   double param_bytes, const CostProfile& profile, const SimConfig& cfg = {},
                                   bool keep_timeline = false) {
  SimReport r;
  r.strategy = plan.strategy.to_string();
  if ((pull && pull->strategy != r.strategy) || (push && push->strategy != r.strategy))
    throw InvalidArgument("simulate_strategy: plan strategy " + r.strategy + " does not match the comm plans");
  const auto schemes = plan.strategy.pipelines();
  for (std::size_t j = 0; j < plan.packings.size(); ++j) {
    PipelineReport p;
    p.estimated = plan.packings[j].objective;
    for (const auto& mb : plan.packings[j].per_microbatch) p.microbatch_times.push_back(mb.time);
    if (!p.microbatch_times.empty()) {
      auto sim = simulate_pipeline(p.microbatch_times, schemes[j].pp, cfg);
      p.simulated = sim.latency;
      p.bubble_fraction = sim.bubble_fraction;
      p.estimate_delta = p.estimated > 0 ? (p.simulated - p.estimated) / p.estimated : 0;
      if (keep_timeline) p.timeline = std::move(sim.timeline);
    }
    r.propagation = std::max(r.propagation, p.simulated);
    r.per_pipeline.push_back(std::move(p));
  }
  if (pull && push) r.comm = comm_seconds(*pull, *push, param_bytes, profile.hardware().bandwidth, cfg);
  r.iteration_latency = assemble_iteration(r.propagation, r.comm, cfg.overlap);
  r.comm_after_overlap = r.iteration_latency - r.propagation;
  r.estimated_latency = plan.estimated_latency;
  return r;
}

/// Parameter bytes of the flattened model: 16-bit weights of 12 H^2 per layer plus the embedding.
inline double param_bytes(const ModelShape& m) {
  const double H = static_cast<double>(m.hidden);
  return (12.0 * H * H * static_cast<double>(m.layers) + H * static_cast<double>(m.vocab)) * 2.0;
}

// ---------------------------------------------------------------------------
// Policy ladder.
// ---------------------------------------------------------------------------

struct PolicyRow {
  std::string name;
  std::string strategy;  // fixed strategy, empty for dynamic selection
  std::vector<Seconds> latencies;
  std::vector<double> balance;  // per iteration max/min pipeline latency
  double mean = 0;
  double stddev = 0;
};

struct Comparison {
  std::vector<PolicyRow> rows;  // (i) .. (iv)
  std::vector<std::vector<double>> speedup;  // speedup[a][b] = mean_a / mean_b
  std::vector<std::string> dynamic_choices;  // strategy chosen by (iv) per iteration
};

struct CompareOptions {
  Tokens context_length = 32768;
  PlanOptions plan;
  SimConfig sim;
  bool with_comm = true;
};

namespace detail {

inline void finish_row(PolicyRow& row) {
  const double n = static_cast<double>(row.latencies.size());
  double s = 0;
  for (double x : row.latencies) s += x;
  row.mean = n > 0 ? s / n : 0;
  double q = 0;
  for (double x : row.latencies) q += (x - row.mean) * (x - row.mean);
  row.stddev = n > 1 ? std::sqrt(q / (n - 1)) : 0;
}

inline double balance_ratio(const std::vector<PipelineReport>& p) {
  Seconds mx = 0, mn = kInfinity;
  for (const auto& x : p) {
    mx = std::max(mx, x.simulated);
    mn = std::min(mn, x.simulated);
  }
  return mn > 0 ? mx / mn : kInfinity;
}

}  // namespace detail

/// Max-length baseline: FFD into bins of min(context, MaxLen) tokens, bins dealt
/// round-robin to pipelines in FFD order. Each pipeline keeps its bins as micro-batches.
inline StrategyPlan plan_maxlen_roundrobin(const std::vector<Tokens>& lengths, const Strategy& strategy,
                                           const CostProfile& profile, Tokens context_length) {
  StrategyPlan plan;
  plan.strategy = sort_by_max_len(canonical(strategy), profile);
  const auto pipes = profile.pipeline_costs(plan.strategy);
  const SchemeCost& sc = pipes.front();
  for (const auto& p : pipes)
    if (p.scheme != sc.scheme) throw InvalidArgument("max-length baseline needs a homogeneous strategy");
  const PackingPlan bins = pack_ffd(lengths, sc, std::min(context_length, sc.max_len));
  const std::size_t d = pipes.size();
  plan.members.assign(d, {});
  std::vector<std::vector<int>> bin_of(d);
  plan.dispatch.assignment.assign(lengths.size(), 0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const auto pj = static_cast<std::size_t>(bins.assignment[i]) % d;
    plan.dispatch.assignment[i] = static_cast<int>(pj);
    plan.members[pj].push_back(static_cast<int>(i));
  }
  plan.dispatch = make_dispatch_plan(lengths, plan.dispatch.assignment, pipes, false);
  plan.dispatch_method = "round_robin";
  plan.packings.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<Tokens> sub;
    std::vector<int> local;
    for (int i : plan.members[j]) {
      sub.push_back(lengths[static_cast<std::size_t>(i)]);
      local.push_back(bins.assignment[static_cast<std::size_t>(i)] / static_cast<int>(d));
    }
    plan.packings[j] = finalize_packing(sub, pipes[j], std::move(local), false);
    plan.estimated_latency = std::max(plan.estimated_latency, plan.packings[j].objective);
    Tokens tok = 0;
    for (Tokens l : sub) tok += l;
    plan.pipeline_tokens.push_back(tok);
    plan.microbatch_counts.push_back(plan.packings[j].v);
    plan.empty_pipelines.push_back(sub.empty());
  }
  return plan;
}

/// Homogeneous full-cluster strategies whose scheme holds `context` tokens.
inline std::vector<Strategy> homogeneous_candidates(const CostProfile& profile, Tokens context) {
  std::vector<Strategy> out;
  const int n = profile.hardware().n_gpus;
  for (const auto& s : profile.feasible_schemes())
    if (profile.max_len(s) >= context && s.gpus() <= n && n % s.gpus() == 0 &&
        static_cast<int>(profile.shape().layers) % s.pp == 0)
      out.push_back(homogeneous_strategy(s, n / s.gpus()));
  return out;
}

/// Four-step ladder: (i) best static homogeneous + max-length packing +
/// round-robin, (ii) the same strategy with two-stage assignment, (iii) the
/// best fixed strategy among candidates, (iv) per-iteration selection.
inline Comparison compare_policies(const std::vector<std::vector<Tokens>>& minibatches,
                                   const std::vector<Strategy>& candidates, const CostProfile& profile,
                                   const CompareOptions& options = {}) {
  if (minibatches.empty()) throw InvalidArgument("compare_policies: no mini-batches");
  const int n = profile.hardware().n_gpus;
  const int layers = static_cast<int>(profile.shape().layers);
  const double W = param_bytes(profile.shape());

  std::map<std::string, std::pair<CommPlan, CommPlan>> comm_cache;
  auto comm_for = [&](const Strategy& s) -> const std::pair<CommPlan, CommPlan>& {
    const auto key = s.to_string();
    auto it = comm_cache.find(key);
    if (it == comm_cache.end())
      it = comm_cache.emplace(key, std::make_pair(pull_plan(s, n, layers), push_plan(s, n, layers))).first;
    return it->second;
  };
  auto simulate = [&](const StrategyPlan& plan) {
    if (!options.with_comm) return simulate_strategy(plan, nullptr, nullptr, W, profile, options.sim);
    const auto& c = comm_for(plan.strategy);
    return simulate_strategy(plan, &c.first, &c.second, W, profile, options.sim);
  };
  auto plan_opts = [&](std::size_t it) {
    PlanOptions o = options.plan;
    o.seed = derive_seed(options.plan.seed, "iteration", it);
    return o;
  };
  const std::size_t iters = minibatches.size();

  // (i): pick H* by mean simulated latency under the baseline policy.
  const auto homs = homogeneous_candidates(profile, options.context_length);
  if (homs.empty()) throw InfeasibleError("compare_policies: no homogeneous strategy holds the context length");
  PolicyRow best_i;
  Strategy hstar;
  std::vector<std::vector<PipelineReport>> best_i_pipes;
  for (const auto& h : homs) {
    PolicyRow row;
    row.name = "(i) static homogeneous + max-length packing";
    std::vector<std::vector<PipelineReport>> pipes;
    for (std::size_t it = 0; it < iters; ++it) {
      const auto plan = plan_maxlen_roundrobin(minibatches[it], h, profile, options.context_length);
      const auto rep = simulate(plan);
      row.latencies.push_back(rep.iteration_latency);
      row.balance.push_back(detail::balance_ratio(rep.per_pipeline));
    }
    detail::finish_row(row);
    if (best_i.latencies.empty() || row.mean < best_i.mean) {
      best_i = row;
      hstar = sort_by_max_len(canonical(h), profile);
    }
  }
  best_i.strategy = hstar.to_string();

  // (ii): H* with dispatch + packing.
  PolicyRow row_ii{"(ii) static homogeneous + two-stage assignment", hstar.to_string(), {}, {}, 0, 0};
  for (std::size_t it = 0; it < iters; ++it) {
    const auto rep = simulate(plan_strategy(minibatches[it], hstar, profile, plan_opts(it)));
    row_ii.latencies.push_back(rep.iteration_latency);
    row_ii.balance.push_back(detail::balance_ratio(rep.per_pipeline));
  }
  detail::finish_row(row_ii);

  // Candidate pool for (iii) and (iv): candidates plus H*.
  std::vector<Strategy> pool;
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    const auto s = sort_by_max_len(canonical(c), profile);
    if (seen.insert(s.to_string()).second) pool.push_back(s);
  }
  if (seen.insert(hstar.to_string()).second) pool.push_back(hstar);

  // Estimated latency of every pool member on every mini-batch.
  std::vector<std::vector<std::optional<StrategyPlan>>> plans(pool.size(),
                                                              std::vector<std::optional<StrategyPlan>>(iters));
  parallel_for(pool.size() * iters, [&](std::size_t k) {
    const std::size_t c = k / iters, it = k % iters;
    try {
      plans[c][it] = plan_strategy(minibatches[it], pool[c], profile, plan_opts(it));
    } catch (const InfeasibleError&) {
    }
  });

  std::vector<std::vector<std::optional<SimReport>>> reports(pool.size(),
                                                             std::vector<std::optional<SimReport>>(iters));
  for (std::size_t c = 0; c < pool.size(); ++c)
    for (std::size_t it = 0; it < iters; ++it)
      if (plans[c][it]) reports[c][it] = simulate(*plans[c][it]);

  // (iii): the fixed pool member with the best mean simulated latency over
  // mini-batches it can serve entirely.
  std::optional<std::size_t> fixed;
  double fixed_mean = kInfinity;
  for (std::size_t c = 0; c < pool.size(); ++c) {
    double s = 0;
    bool ok = true;
    for (std::size_t it = 0; it < iters && ok; ++it) {
      ok = reports[c][it].has_value();
      if (ok) s += reports[c][it]->iteration_latency;
    }
    if (!ok) continue;
    const double m = s / static_cast<double>(iters);
    if (!fixed || m < fixed_mean) {
      fixed = c;
      fixed_mean = m;
    }
  }
  PolicyRow row_iii{"(iii) fixed heterogeneous", pool[*fixed].to_string(), {}, {}, 0, 0};
  for (std::size_t it = 0; it < iters; ++it) {
    const auto& rep = *reports[*fixed][it];
    row_iii.latencies.push_back(rep.iteration_latency);
    row_iii.balance.push_back(detail::balance_ratio(rep.per_pipeline));
  }
  detail::finish_row(row_iii);

  // (iv): per-iteration argmin of the estimate (ties: fewer GPUs, then text).
  Comparison out;
  PolicyRow row_iv{"(iv) dynamic heterogeneous", "", {}, {}, 0, 0};
  for (std::size_t it = 0; it < iters; ++it) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (!plans[c][it]) continue;
      if (!best) {
        best = c;
        continue;
      }
      const double a = plans[c][it]->estimated_latency, b = plans[*best][it]->estimated_latency;
      const int ga = pool[c].total_gpus(), gb = pool[*best].total_gpus();
      if (a < b || (a == b && (ga < gb || (ga == gb && pool[c].to_string() < pool[*best].to_string())))) best = c;
    }
    const auto& rep = *reports[*best][it];
    row_iv.latencies.push_back(rep.iteration_latency);
    row_iv.balance.push_back(detail::balance_ratio(rep.per_pipeline));
    out.dynamic_choices.push_back(pool[*best].to_string());
  }
  detail::finish_row(row_iv);

  out.rows = {best_i, row_ii, row_iii, row_iv};
  out.speedup.assign(4, std::vector<double>(4, 1.0));
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      out.speedup[a][b] = out.rows[b].mean > 0 ? out.rows[a].mean / out.rows[b].mean : 1.0;
  return out;
}

}  // namespace hydra
