// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"

namespace hydra {

struct MicroBatchLoad {
  Tokens tokens = 0;
  Seconds time = 0;
};

/// Partition of one pipeline's sequences into micro-batches.
struct PackingPlan {
  std::vector<int> assignment;  // sequence index -> micro-batch index
  int v = 0;
  Seconds objective = 0;  // max micro-batch time * (pp - 1 + v)
  std::vector<MicroBatchLoad> per_microbatch;
  bool optimal = true;  // false when the exact search ran out of nodes or the heuristic was used
};

enum class PackMode { kExact, kHeuristic, kAuto };

struct PackOptions {
  PackMode mode = PackMode::kAuto;
  std::size_t exact_cutover = 12;  // kAuto uses exact when U <= cutover
  std::uint64_t node_budget = 4'000'000;
};

inline Seconds pipeline_factor(int pp, int v) { return static_cast<Seconds>(pp - 1 + v); }

/// Relabels micro-batches in order of first use and recomputes loads, summing
/// member times in ascending sequence index.
inline PackingPlan finalize_packing(const std::vector<Tokens>& lengths, const SchemeCost& cost,
                                    std::vector<int> assignment, bool optimal) {
  PackingPlan plan;
  plan.optimal = optimal;
  std::vector<int> relabel;
  for (int& a : assignment) {
    if (a >= static_cast<int>(relabel.size())) relabel.resize(static_cast<std::size_t>(a) + 1, -1);
    if (relabel[static_cast<std::size_t>(a)] < 0) relabel[static_cast<std::size_t>(a)] = plan.v++;
    a = relabel[static_cast<std::size_t>(a)];
  }
  plan.per_microbatch.assign(static_cast<std::size_t>(plan.v), {});
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    auto& mb = plan.per_microbatch[static_cast<std::size_t>(assignment[i])];
    mb.tokens += lengths[i];
    mb.time += cost.latency(lengths[i]);
  }
  Seconds mx = 0;
  for (const auto& mb : plan.per_microbatch) mx = std::max(mx, mb.time);
  plan.objective = plan.v == 0 ? 0 : mx * pipeline_factor(cost.pp(), plan.v);
  plan.assignment = std::move(assignment);
  return plan;
}

/// Structural audit of every PackingPlan invariant; empty when all hold.
inline std::vector<std::string> audit_packing(const PackingPlan& plan, const std::vector<Tokens>& lengths,
                                              const SchemeCost& cost) {
  std::vector<std::string> bad;
  if (plan.assignment.size() != lengths.size()) {
    bad.push_back("assignment size " + std::to_string(plan.assignment.size()) + " != " + std::to_string(lengths.size()));
    return bad;
  }
  if (static_cast<int>(plan.per_microbatch.size()) != plan.v) bad.push_back("per_microbatch size != v");
  std::vector<MicroBatchLoad> loads(static_cast<std::size_t>(std::max(plan.v, 0)));
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int a = plan.assignment[i];
    if (a < 0 || a >= plan.v) {
      bad.push_back("sequence " + std::to_string(i) + " assigned to invalid micro-batch " + std::to_string(a));
      continue;
    }
    loads[static_cast<std::size_t>(a)].tokens += lengths[i];
    loads[static_cast<std::size_t>(a)].time += cost.latency(lengths[i]);
  }
  Seconds mx = 0;
  for (int j = 0; j < plan.v; ++j) {
    const auto& l = loads[static_cast<std::size_t>(j)];
    if (l.tokens == 0) bad.push_back("micro-batch " + std::to_string(j) + " is empty");
    if (l.tokens > cost.max_len)
      bad.push_back("micro-batch " + std::to_string(j) + " holds " + std::to_string(l.tokens) + " tokens > MaxLen " +
                    std::to_string(cost.max_len));
    if (j < static_cast<int>(plan.per_microbatch.size()) &&
        (plan.per_microbatch[static_cast<std::size_t>(j)].tokens != l.tokens ||
         plan.per_microbatch[static_cast<std::size_t>(j)].time != l.time))
      bad.push_back("micro-batch " + std::to_string(j) + " stored load differs from recomputation");
    mx = std::max(mx, l.time);
  }
  const Seconds obj = plan.v == 0 ? 0 : mx * pipeline_factor(cost.pp(), plan.v);
  if (obj != plan.objective) bad.push_back("objective differs from recomputation");
  return bad;
}

/// Micro-batch counts worth trying: from ceil(total / MaxLen) up to
/// total / UtilLen, capped at U.
inline std::pair<int, int> v_range(const std::vector<Tokens>& lengths, const SchemeCost& cost) {
  Tokens total = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] > cost.max_len)
      throw InfeasibleError("sequence " + std::to_string(i) + " (length " + std::to_string(lengths[i]) +
                            ") exceeds MaxLen " + std::to_string(cost.max_len) + " of " + cost.scheme.to_string());
    total += lengths[i];
  }
  const int u = static_cast<int>(lengths.size());
  const int vmin = std::max<int>(static_cast<int>(ceil_div(total, cost.max_len)), 1);
  const int vmax = std::min<int>(static_cast<int>(total / std::max<Tokens>(cost.util_len, 1)), u);
  if (vmax < vmin) return {vmin, vmin};
  return {vmin, vmax};
}

namespace detail {

inline std::vector<std::size_t> order_by_time_desc(const std::vector<Tokens>& lengths, const SchemeCost& cost) {
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const Seconds tx = cost.latency(lengths[x]), ty = cost.latency(lengths[y]);
    if (tx != ty) return tx > ty;
    return lengths[x] > lengths[y];
  });
  return order;
}

// LPT seeding with capacity, then first-fit-decreasing on tokens as a fallback.
inline std::optional<std::vector<int>> seed_assignment(const std::vector<Tokens>& lengths, const SchemeCost& cost,
                                                       int v) {
  const auto order = order_by_time_desc(lengths, cost);
  std::vector<MicroBatchLoad> parts(static_cast<std::size_t>(v));
  std::vector<int> assign(lengths.size(), -1);
  bool ok = true;
  for (std::size_t i : order) {
    int best = -1;
    for (int j = 0; j < v; ++j) {
      const auto& p = parts[static_cast<std::size_t>(j)];
      if (p.tokens + lengths[i] > cost.max_len) continue;
      if (best < 0 || p.time < parts[static_cast<std::size_t>(best)].time) best = j;
    }
    if (best < 0) {
      ok = false;
      break;
    }
    assign[i] = best;
    parts[static_cast<std::size_t>(best)].tokens += lengths[i];
    parts[static_cast<std::size_t>(best)].time += cost.latency(lengths[i]);
  }
  if (ok) return assign;

  std::vector<std::size_t> by_len(lengths.size());
  std::iota(by_len.begin(), by_len.end(), std::size_t{0});
  std::stable_sort(by_len.begin(), by_len.end(), [&](std::size_t x, std::size_t y) { return lengths[x] > lengths[y]; });
  std::vector<Tokens> fill(static_cast<std::size_t>(v), 0);
  for (std::size_t i : by_len) {
    int j = 0;
    while (j < v && fill[static_cast<std::size_t>(j)] + lengths[i] > cost.max_len) ++j;
    if (j == v) return std::nullopt;
    fill[static_cast<std::size_t>(j)] += lengths[i];
    assign[i] = j;
  }
  return assign;
}

// Move/swap descent. A move between parts a and b is taken when it lowers
// max(time_a, time_b), which strictly lowers the descending time profile.
// Parts are never emptied here; smaller part counts are tried by the caller.
inline void local_search(const std::vector<Tokens>& lengths, const SchemeCost& cost, int v, std::vector<int>& assign) {
  const std::size_t u = lengths.size();
  std::vector<Seconds> t(u);
  for (std::size_t i = 0; i < u; ++i) t[i] = cost.latency(lengths[i]);
  std::vector<MicroBatchLoad> parts;
  std::vector<int> members;
  auto recompute = [&] {
    parts.assign(static_cast<std::size_t>(v), {});
    members.assign(static_cast<std::size_t>(v), 0);
    for (std::size_t i = 0; i < u; ++i) {
      auto& p = parts[static_cast<std::size_t>(assign[i])];
      p.tokens += lengths[i];
      p.time += t[i];
      ++members[static_cast<std::size_t>(assign[i])];
    }
  };
  recompute();
  const std::size_t max_rounds = 64 * (u + 1) * static_cast<std::size_t>(v);
  for (std::size_t round = 0; round < max_rounds; ++round) {
    bool improved = false;
    for (std::size_t i = 0; i < u && !improved; ++i) {
      const auto a = static_cast<std::size_t>(assign[i]);
      if (members[a] < 2) continue;
      const Seconds before_a = parts[a].time;
      for (std::size_t b = 0; b < static_cast<std::size_t>(v) && !improved; ++b) {
        if (b == a || parts[b].tokens + lengths[i] > cost.max_len) continue;
        const Seconds old_max = std::max(before_a, parts[b].time);
        const Seconds new_max = std::max(before_a - t[i], parts[b].time + t[i]);
        if (new_max < old_max) {
          assign[i] = static_cast<int>(b);
          improved = true;
        }
      }
    }
    for (std::size_t i = 0; i < u && !improved; ++i) {
      for (std::size_t k = i + 1; k < u && !improved; ++k) {
        const auto a = static_cast<std::size_t>(assign[i]), b = static_cast<std::size_t>(assign[k]);
        if (a == b || t[i] == t[k]) continue;
        const Tokens dl = lengths[k] - lengths[i];
        if (parts[a].tokens + dl > cost.max_len || parts[b].tokens - dl > cost.max_len) continue;
        const Seconds dt = t[k] - t[i];
        const Seconds old_max = std::max(parts[a].time, parts[b].time);
        const Seconds new_max = std::max(parts[a].time + dt, parts[b].time - dt);
        if (new_max < old_max) {
          std::swap(assign[i], assign[k]);
          improved = true;
        }
      }
    }
    if (!improved) break;
    recompute();
  }
}

struct ExactSearch {
  const std::vector<Tokens>& lengths;
  const SchemeCost& cost;
  int v;
  std::uint64_t node_budget;

  std::vector<std::size_t> order;
  std::vector<Seconds> item_time;
  std::vector<Seconds> suffix_time;
  std::vector<Tokens> suffix_tokens;
  std::vector<MicroBatchLoad> parts;
  std::vector<int> assign;
  std::vector<int> best_assign;
  Seconds best = kInfinity;
  int best_used = 0;
  std::uint64_t nodes = 0;
  bool exhausted = false;
  int min_parts = 1;

  Seconds bound(Seconds curmax, int used, Seconds total_time) const {
    Seconds lb = kInfinity;
    for (int p = std::max({used, min_parts, 1}); p <= v; ++p)
      lb = std::min(lb, std::max(curmax, total_time / p) * pipeline_factor(cost.pp(), p));
    return lb;
  }

  void run(std::size_t depth, int used, Seconds curmax, Seconds placed_time) {
    if (exhausted) return;
    if (++nodes > node_budget) {
      exhausted = true;
      return;
    }
    if (depth == order.size()) {
      const Seconds obj = curmax * pipeline_factor(cost.pp(), used);
      if (obj < best || (obj == best && used < best_used)) {
        best = obj;
        best_used = used;
        best_assign = assign;
      }
      return;
    }
    const Seconds total = placed_time + suffix_time[depth];
    if (bound(curmax, used, total) * (1 - 1e-12) >= best) return;
    // Remaining capacity check, counting unopened parts.
    Tokens free = static_cast<Tokens>(v - used) * cost.max_len;
    for (int j = 0; j < used; ++j) free += cost.max_len - parts[static_cast<std::size_t>(j)].tokens;
    if (free < suffix_tokens[depth]) return;

    const std::size_t i = order[depth];
    const Tokens l = lengths[i];
    const Seconds t = item_time[depth];
    for (int j = 0; j < used + (used < v ? 1 : 0); ++j) {
      auto& p = parts[static_cast<std::size_t>(j)];
      if (p.tokens + l > cost.max_len) continue;
      // Parts with identical loads are interchangeable.
      bool dup = false;
      for (int k = 0; k < j && !dup; ++k)
        dup = parts[static_cast<std::size_t>(k)].tokens == p.tokens && parts[static_cast<std::size_t>(k)].time == p.time;
      if (dup && j < used) continue;
      p.tokens += l;
      p.time += t;
      assign[i] = j;
      run(depth + 1, j == used ? used + 1 : used, std::max(curmax, p.time), placed_time + t);
      p.tokens -= l;
      p.time -= t;
      assign[i] = -1;
      if (exhausted) return;
    }
  }
};

}  // namespace detail

/// Heuristic pack for at most v micro-batches: LPT seeding, then move/swap
/// local search. nullopt when no seed respects capacity.
inline std::optional<PackingPlan> pack_heuristic_for_v(const std::vector<Tokens>& lengths, const SchemeCost& cost,
                                                       int v) {
  auto seed = detail::seed_assignment(lengths, cost, v);
  if (!seed) return std::nullopt;
  detail::local_search(lengths, cost, v, *seed);
  return finalize_packing(lengths, cost, std::move(*seed), false);
}

/// Optimum of the packing objective over partitions into at most v nonempty
/// micro-batches (each plan scored with its real micro-batch count).
/// nullopt when no capacity-respecting partition exists.
inline std::optional<PackingPlan> pack_exact_for_v(const std::vector<Tokens>& lengths, const SchemeCost& cost, int v,
                                                   std::uint64_t node_budget = 4'000'000) {
  for (Tokens l : lengths)
    if (l > cost.max_len) return std::nullopt;
  if (lengths.empty()) return finalize_packing(lengths, cost, {}, true);
  detail::ExactSearch s{lengths, cost, v, node_budget, {}, {}, {}, {}, {}, {}, {}, kInfinity, 0, 0, false, 1};
  s.order = detail::order_by_time_desc(lengths, cost);
  const std::size_t u = lengths.size();
  s.item_time.resize(u);
  s.suffix_time.assign(u + 1, 0);
  s.suffix_tokens.assign(u + 1, 0);
  for (std::size_t d = 0; d < u; ++d) s.item_time[d] = cost.latency(lengths[s.order[d]]);
  for (std::size_t d = u; d-- > 0;) {
    s.suffix_time[d] = s.suffix_time[d + 1] + s.item_time[d];
    s.suffix_tokens[d] = s.suffix_tokens[d + 1] + lengths[s.order[d]];
  }
  s.min_parts = static_cast<int>(ceil_div(s.suffix_tokens[0], cost.max_len));
  if (s.min_parts > v) return std::nullopt;
  s.parts.assign(static_cast<std::size_t>(v), {});
  s.assign.assign(u, -1);
  if (auto h = pack_heuristic_for_v(lengths, cost, v)) {
    s.best = h->objective;
    s.best_used = h->v;
    s.best_assign = h->assignment;
  }
  s.run(0, 0, 0, 0);
  if (s.best_assign.empty()) return std::nullopt;
  return finalize_packing(lengths, cost, s.best_assign, !s.exhausted);
}

inline std::optional<PackingPlan> pack_for_v(const std::vector<Tokens>& lengths, const SchemeCost& cost, int v,
                                             const PackOptions& options = {}) {
  if (v < 1 || v > static_cast<int>(std::max<std::size_t>(lengths.size(), 1)))
    throw InvalidArgument("pack_for_v: v must be in [1, U]");
  const bool exact = options.mode == PackMode::kExact ||
                     (options.mode == PackMode::kAuto && lengths.size() <= options.exact_cutover);
  return exact ? pack_exact_for_v(lengths, cost, v, options.node_budget) : pack_heuristic_for_v(lengths, cost, v);
}

/// Best plan over the pruned v range, ties toward smaller v. Empty input gives
/// an empty plan with objective 0.
inline PackingPlan pack(const std::vector<Tokens>& lengths, const SchemeCost& cost, const PackOptions& options = {}) {
  if (lengths.empty()) return finalize_packing(lengths, cost, {}, true);
  const auto [vmin, vmax] = v_range(lengths, cost);
  const int u = static_cast<int>(lengths.size());
  Seconds total_time = 0, max_time = 0;
  for (Tokens l : lengths) {
    total_time += cost.latency(l);
    max_time = std::max(max_time, cost.latency(l));
  }
  std::optional<PackingPlan> best;
  auto consider = [&](int v) {
    // No plan with exactly v parts can beat this; fewer parts were tried already.
    const Seconds lb = std::max(total_time / v, max_time) * pipeline_factor(cost.pp(), v);
    if (best && lb * (1 - 1e-12) >= best->objective) return;
    auto p = pack_for_v(lengths, cost, v, options);
    if (p && (!best || p->objective < best->objective)) best = std::move(p);
  };
  for (int v = vmin; v <= vmax; ++v) consider(v);
  for (int v = vmax + 1; !best && v <= u; ++v) consider(v);
  if (!best)
    throw InfeasibleError("no capacity-respecting packing of " + std::to_string(u) + " sequences for " +
                          cost.scheme.to_string());
  return *best;
}

/// Baseline: first-fit-decreasing by length into bins of `capacity` tokens.
inline PackingPlan pack_ffd(const std::vector<Tokens>& lengths, const SchemeCost& cost, Tokens capacity) {
  capacity = std::min(capacity, cost.max_len);
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return lengths[x] > lengths[y]; });
  std::vector<Tokens> fill;
  std::vector<int> assign(lengths.size(), -1);
  for (std::size_t i : order) {
    if (lengths[i] > capacity)
      throw InfeasibleError("sequence " + std::to_string(i) + " exceeds packing capacity " + std::to_string(capacity));
    std::size_t j = 0;
    while (j < fill.size() && fill[j] + lengths[i] > capacity) ++j;
    if (j == fill.size()) fill.push_back(0);
    fill[j] += lengths[i];
    assign[i] = static_cast<int>(j);
  }
  return finalize_packing(lengths, cost, std::move(assign), false);
}

}  // namespace hydra
