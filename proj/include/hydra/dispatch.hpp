// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"

namespace hydra {

/// Assignment of a mini-batch's sequences to pipelines.
struct DispatchPlan {
  std::vector<int> assignment;  // sequence index -> pipeline index
  std::vector<Seconds> per_pipeline_bound;
  Seconds objective = 0;
  bool optimal = false;  // true only for a completed exact search
};

/// sum T(l) + T(max l) * (pp - 1) over `lengths`; 0 for the empty set.
inline Seconds lower_bound(const std::vector<Tokens>& lengths, const SchemeCost& cost) {
  if (lengths.empty()) return 0;
  Seconds sum = 0;
  Tokens mx = 0;
  for (Tokens l : lengths) {
    sum += cost.latency(l);
    mx = std::max(mx, l);
  }
  return sum + cost.latency(mx) * (cost.pp() - 1);
}

/// Number of leading pipelines able to hold `length` (pipelines sorted by
/// descending MaxLen). Pipelines [0, J) are feasible.
inline int feasibility_horizon(Tokens length, const std::vector<SchemeCost>& pipelines) {
  int j = 0;
  while (j < static_cast<int>(pipelines.size()) && pipelines[static_cast<std::size_t>(j)].max_len >= length) ++j;
  if (j == 0) {
    const Tokens best = pipelines.empty() ? 0 : pipelines.front().max_len;
    throw InfeasibleError("sequence of length " + std::to_string(length) + " exceeds every pipeline's MaxLen (largest " +
                          std::to_string(best) + ")");
  }
  return j;
}

inline void require_sorted_by_max_len(const std::vector<SchemeCost>& pipelines) {
  if (pipelines.empty()) throw InvalidArgument("dispatch: no pipelines");
  for (std::size_t j = 1; j < pipelines.size(); ++j)
    if (pipelines[j].max_len > pipelines[j - 1].max_len)
      throw InvalidArgument("dispatch: pipelines must be sorted by descending MaxLen");
}

/// Per-pipeline lower bounds of an assignment, members taken in ascending
/// sequence index.
inline std::vector<Seconds> pipeline_bounds(const std::vector<Tokens>& lengths, const std::vector<int>& assignment,
                                            const std::vector<SchemeCost>& pipelines) {
  std::vector<std::vector<Tokens>> sets(pipelines.size());
  for (std::size_t i = 0; i < lengths.size(); ++i) sets[static_cast<std::size_t>(assignment[i])].push_back(lengths[i]);
  std::vector<Seconds> out(pipelines.size());
  for (std::size_t j = 0; j < pipelines.size(); ++j) out[j] = lower_bound(sets[j], pipelines[j]);
  return out;
}

inline DispatchPlan make_dispatch_plan(const std::vector<Tokens>& lengths, std::vector<int> assignment,
                                       const std::vector<SchemeCost>& pipelines, bool optimal) {
  DispatchPlan p;
  p.per_pipeline_bound = pipeline_bounds(lengths, assignment, pipelines);
  p.assignment = std::move(assignment);
  p.objective = 0;
  for (Seconds b : p.per_pipeline_bound) p.objective = std::max(p.objective, b);
  p.optimal = optimal;
  return p;
}

inline std::vector<std::string> audit_dispatch(const DispatchPlan& plan, const std::vector<Tokens>& lengths,
                                               const std::vector<SchemeCost>& pipelines) {
  std::vector<std::string> bad;
  if (plan.assignment.size() != lengths.size()) {
    bad.push_back("dispatch assignment size mismatch");
    return bad;
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int a = plan.assignment[i];
    if (a < 0 || a >= static_cast<int>(pipelines.size())) {
      bad.push_back("sequence " + std::to_string(i) + " assigned to invalid pipeline");
      return bad;
    }
    if (pipelines[static_cast<std::size_t>(a)].max_len < lengths[i])
      bad.push_back("sequence " + std::to_string(i) + " beyond the feasibility horizon of pipeline " + std::to_string(a));
  }
  const auto bounds = pipeline_bounds(lengths, plan.assignment, pipelines);
  if (bounds != plan.per_pipeline_bound) bad.push_back("per-pipeline bounds differ from recomputation");
  Seconds mx = 0;
  for (Seconds b : bounds) mx = std::max(mx, b);
  if (mx != plan.objective) bad.push_back("dispatch objective differs from recomputation");
  return bad;
}

namespace detail {

// One greedy pass over `order`. Ties on the global max go to the pipeline whose
// own bound ends lowest, then to the larger index.
inline std::vector<int> greedy_pass(const std::vector<Tokens>& lengths, const std::vector<std::size_t>& order,
                                    const std::vector<SchemeCost>& pipelines, const std::vector<int>& horizon) {
  const std::size_t d = pipelines.size();
  std::vector<Seconds> C(d, 0), E(d, 0);
  std::vector<Tokens> M(d, 0);
  std::vector<int> assign(lengths.size(), -1);
  for (std::size_t i : order) {
    // Top two of C+E for the "all other pipelines" max.
    Seconds top1 = 0, top2 = 0;
    std::size_t arg1 = d;
    for (std::size_t k = 0; k < d; ++k) {
      const Seconds v = C[k] + E[k];
      if (arg1 == d || v > top1) {
        top2 = arg1 == d ? 0 : top1;
        top1 = v;
        arg1 = k;
      } else if (v > top2) {
        top2 = v;
      }
    }
    Seconds best = kInfinity, best_own = kInfinity;
    std::size_t arg = d;
    for (std::size_t j = 0; j < static_cast<std::size_t>(horizon[i]); ++j) {
      const Seconds cj = C[j] + pipelines[j].latency(lengths[i]);
      const Seconds ej = pipelines[j].latency(std::max(M[j], lengths[i])) * (pipelines[j].pp() - 1);
      const Seconds others = d == 1 ? 0 : (j == arg1 ? top2 : top1);
      const Seconds o = std::max(cj + ej, others);
      if (o < best || (o == best && cj + ej <= best_own)) {
        best = o;
        best_own = cj + ej;
        arg = j;
      }
    }
    C[arg] += pipelines[arg].latency(lengths[i]);
    M[arg] = std::max(M[arg], lengths[i]);
    E[arg] = pipelines[arg].latency(M[arg]) * (pipelines[arg].pp() - 1);
    assign[i] = static_cast<int>(arg);
  }
  return assign;
}

inline bool same_cost(const SchemeCost& x, const SchemeCost& y) {
  return x.scheme == y.scheme && x.max_len == y.max_len && x.coeffs.a == y.coeffs.a && x.coeffs.b == y.coeffs.b &&
         x.coeffs.c == y.coeffs.c;
}

struct DispatchSearch {
  const std::vector<Tokens>& lengths;
  const std::vector<SchemeCost>& pipelines;
  std::uint64_t node_budget;

  std::vector<std::size_t> order;
  std::vector<int> horizon;
  std::vector<Seconds> suffix_min_time;
  std::vector<Seconds> C;
  std::vector<Tokens> M;
  std::vector<int> assign;
  std::vector<int> best_assign;
  Seconds best = kInfinity;
  std::uint64_t nodes = 0;
  bool exhausted = false;

  Seconds bound_of(std::size_t j) const {
    return M[j] == 0 ? 0 : C[j] + pipelines[j].latency(M[j]) * (pipelines[j].pp() - 1);
  }

  void run(std::size_t depth) {
    if (exhausted) return;
    if (++nodes > node_budget) {
      exhausted = true;
      return;
    }
    const std::size_t d = pipelines.size();
    Seconds curmax = 0, sum = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const Seconds b = bound_of(j);
      curmax = std::max(curmax, b);
      sum += b;
    }
    if (depth == order.size()) {
      if (curmax < best) {
        best = curmax;
        best_assign = assign;
      }
      return;
    }
    const Seconds lb = std::max(curmax, (sum + suffix_min_time[depth]) / static_cast<Seconds>(d));
    if (lb * (1 - 1e-12) >= best) return;

    const std::size_t i = order[depth];
    const Tokens l = lengths[i];
    for (std::size_t j = 0; j < static_cast<std::size_t>(horizon[i]); ++j) {
      // Identical schemes with identical loads are interchangeable.
      bool dup = false;
      for (std::size_t k = 0; k < j && !dup; ++k)
        dup = same_cost(pipelines[k], pipelines[j]) && C[k] == C[j] && M[k] == M[j];
      if (dup) continue;
      const Seconds oldC = C[j];
      const Tokens oldM = M[j];
      C[j] += pipelines[j].latency(l);
      M[j] = std::max(M[j], l);
      if (bound_of(j) * (1 - 1e-12) < best) {
        assign[i] = static_cast<int>(j);
        run(depth + 1);
        assign[i] = -1;
      }
      C[j] = oldC;
      M[j] = oldM;
      if (exhausted) return;
    }
  }
};

}  // namespace detail

/// Multi-trial greedy: `trials` randomized passes, best kept (ties: lower trial).
inline DispatchPlan dispatch_greedy(const std::vector<Tokens>& lengths, const std::vector<SchemeCost>& pipelines,
                                    int trials = 100, std::uint64_t seed = 0) {
  require_sorted_by_max_len(pipelines);
  if (trials < 1) throw InvalidArgument("dispatch_greedy: trials must be >= 1");
  std::vector<int> horizon(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i) horizon[i] = feasibility_horizon(lengths[i], pipelines);
  std::vector<std::vector<int>> results(static_cast<std::size_t>(trials));
  std::vector<Seconds> objectives(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "trial", t));
    rng.shuffle(order);
    results[t] = detail::greedy_pass(lengths, order, pipelines, horizon);
    const auto b = pipeline_bounds(lengths, results[t], pipelines);
    objectives[t] = b.empty() ? 0 : *std::max_element(b.begin(), b.end());
  });
  std::size_t best = 0;
  for (std::size_t t = 1; t < results.size(); ++t)
    if (objectives[t] < objectives[best]) best = t;
  return make_dispatch_plan(lengths, std::move(results[best]), pipelines, pipelines.size() == 1);
}

/// Minimax-optimal dispatch by branch-and-bound. When the node budget runs
/// out the incumbent is returned with optimal = false.
inline DispatchPlan dispatch_exact(const std::vector<Tokens>& lengths, const std::vector<SchemeCost>& pipelines,
                                   std::uint64_t node_budget = 20'000'000) {
  require_sorted_by_max_len(pipelines);
  detail::DispatchSearch s{lengths, pipelines, node_budget, {}, {}, {}, {}, {}, {}, {}, kInfinity, 0, false};
  const std::size_t b = lengths.size(), d = pipelines.size();
  s.horizon.resize(b);
  for (std::size_t i = 0; i < b; ++i) s.horizon[i] = feasibility_horizon(lengths[i], pipelines);
  s.order.resize(b);
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::stable_sort(s.order.begin(), s.order.end(), [&](std::size_t x, std::size_t y) {
    if (lengths[x] != lengths[y]) return lengths[x] > lengths[y];
    return s.horizon[x] < s.horizon[y];
  });
  s.suffix_min_time.assign(b + 1, 0);
  for (std::size_t k = b; k-- > 0;) {
    const std::size_t i = s.order[k];
    Seconds mn = kInfinity;
    for (int j = 0; j < s.horizon[i]; ++j) mn = std::min(mn, pipelines[static_cast<std::size_t>(j)].latency(lengths[i]));
    s.suffix_min_time[k] = s.suffix_min_time[k + 1] + mn;
  }
  s.C.assign(d, 0);
  s.M.assign(d, 0);
  s.assign.assign(b, -1);
  // Incumbent: one deterministic greedy pass in the search order.
  s.best_assign = detail::greedy_pass(lengths, s.order, pipelines, s.horizon);
  {
    const auto bounds = pipeline_bounds(lengths, s.best_assign, pipelines);
    s.best = bounds.empty() ? 0 : *std::max_element(bounds.begin(), bounds.end());
  }
  s.run(0);
  return make_dispatch_plan(lengths, s.best_assign, pipelines, !s.exhausted);
}

}  // namespace hydra
