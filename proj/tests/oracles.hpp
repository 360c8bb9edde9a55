// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference solvers. Deliberately naive: they enumerate, they do
// not prune, and they share no code with the library beyond the value types.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"
#include "hydra/scheme.hpp"

namespace oracle {

using hydra::LatencyCoeffs;
using hydra::ParallelScheme;
using hydra::SchemeCost;
using hydra::Seconds;
using hydra::Tokens;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double T(const LatencyCoeffs& c, Tokens l) {
  const double x = static_cast<double>(l);
  return c.a * x * x + c.b * x + c.c;
}

/// Integer-coefficient scheme cost; keeps every sum exact in double precision.
inline SchemeCost make_cost(int pp, double a, double b, double c, Tokens max_len, Tokens util_len = 1) {
  return SchemeCost{ParallelScheme{1, pp, 1}, LatencyCoeffs{a, b, c}, max_len, util_len};
}

/// Random monotone quadratic cost with small integer coefficients so every
/// sum of latencies stays exact in double precision.
inline SchemeCost random_cost(hydra::Rng& rng, Tokens max_len, Tokens util_len = 1) {
  static constexpr int kDepths[] = {1, 2, 3, 4};
  const int pp = kDepths[rng.below(4)];
  return make_cost(pp, static_cast<double>(rng.below(4)), static_cast<double>(rng.below(51)),
                   static_cast<double>(rng.below(501)), max_len, util_len);
}

inline std::vector<Tokens> random_lengths(hydra::Rng& rng, std::size_t n, Tokens lo, Tokens hi) {
  std::vector<Tokens> out(n);
  for (auto& l : out) l = lo + static_cast<Tokens>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  return out;
}

/// D pipelines sorted by descending MaxLen; the first can hold every length.
inline std::vector<SchemeCost> random_pipelines(hydra::Rng& rng, std::size_t d, Tokens longest) {
  std::vector<SchemeCost> out;
  for (std::size_t j = 0; j < d; ++j) {
    const Tokens cap = j == 0 ? longest + static_cast<Tokens>(rng.below(64))
                              : 16 + static_cast<Tokens>(rng.below(static_cast<std::uint64_t>(longest + 48)));
    out.push_back(random_cost(rng, cap));
  }
  std::stable_sort(out.begin(), out.end(), [](const SchemeCost& x, const SchemeCost& y) { return x.max_len > y.max_len; });
  return out;
}

struct PartitionResult {
  double objective = kInf;
  int parts = 0;
  std::uint64_t partitions_seen = 0;
};

/// Minimum of max-part-time * (pp - 1 + parts) over every set partition of
/// `lengths` into at most `max_parts` blocks of at most `capacity` tokens.
/// Enumerated as restricted growth strings.
inline PartitionResult min_partition(const std::vector<Tokens>& lengths, const LatencyCoeffs& c, int pp, Tokens capacity,
                                     int max_parts) {
  PartitionResult best;
  const std::size_t u = lengths.size();
  std::vector<int> label(u, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    if (i == u) {
      ++best.partitions_seen;
      std::vector<Tokens> tok(static_cast<std::size_t>(used), 0);
      std::vector<double> time(static_cast<std::size_t>(used), 0);
      for (std::size_t k = 0; k < u; ++k) {
        tok[static_cast<std::size_t>(label[k])] += lengths[k];
        time[static_cast<std::size_t>(label[k])] += T(c, lengths[k]);
      }
      for (Tokens t : tok)
        if (t > capacity) return;
      const double obj = *std::max_element(time.begin(), time.end()) * (pp - 1 + used);
      if (obj < best.objective || (obj == best.objective && used < best.parts)) {
        best.objective = obj;
        best.parts = used;
      }
      return;
    }
    for (int p = 0; p <= used && p < max_parts; ++p) {
      label[i] = p;
      rec(i + 1, std::max(used, p + 1));
    }
  };
  if (u == 0) return {0, 0, 1};
  rec(0, 0);
  return best;
}

/// sum T + T(max) * (pp - 1), recomputed from scratch.
inline double bound(const std::vector<Tokens>& set, const SchemeCost& p) {
  if (set.empty()) return 0;
  double sum = 0;
  Tokens mx = 0;
  for (Tokens l : set) {
    sum += T(p.coeffs, l);
    mx = std::max(mx, l);
  }
  return sum + T(p.coeffs, mx) * (p.scheme.pp - 1);
}

/// Minimax over all D^B assignments respecting MaxLen.
inline double min_dispatch(const std::vector<Tokens>& lengths, const std::vector<SchemeCost>& pipes) {
  const std::size_t b = lengths.size(), d = pipes.size();
  std::vector<std::size_t> a(b, 0);
  double best = kInf;
  for (;;) {
    bool ok = true;
    std::vector<std::vector<Tokens>> sets(d);
    for (std::size_t i = 0; i < b && ok; ++i) {
      ok = pipes[a[i]].max_len >= lengths[i];
      sets[a[i]].push_back(lengths[i]);
    }
    if (ok) {
      double mx = 0;
      for (std::size_t j = 0; j < d; ++j) mx = std::max(mx, bound(sets[j], pipes[j]));
      best = std::min(best, mx);
    }
    std::size_t k = 0;
    while (k < b && ++a[k] == d) a[k++] = 0;
    if (k == b) break;
  }
  return best;
}

/// Global minimax of dispatch followed by exact packing: every D^B assignment,
/// every pipeline packed by min_partition with unlimited parts.
inline double min_dispatch_then_pack(const std::vector<Tokens>& lengths, const std::vector<SchemeCost>& pipes) {
  const std::size_t b = lengths.size(), d = pipes.size();
  std::vector<std::size_t> a(b, 0);
  double best = kInf;
  for (;;) {
    bool ok = true;
    std::vector<std::vector<Tokens>> sets(d);
    for (std::size_t i = 0; i < b && ok; ++i) {
      ok = pipes[a[i]].max_len >= lengths[i];
      sets[a[i]].push_back(lengths[i]);
    }
    if (ok) {
      double mx = 0;
      for (std::size_t j = 0; j < d && mx < best; ++j) {
        const auto r = min_partition(sets[j], pipes[j].coeffs, pipes[j].scheme.pp, pipes[j].max_len,
                                     static_cast<int>(std::max<std::size_t>(sets[j].size(), 1)));
        mx = std::max(mx, r.objective);
      }
      best = std::min(best, mx);
    }
    std::size_t k = 0;
    while (k < b && ++a[k] == d) a[k++] = 0;
    if (k == b) break;
  }
  return best;
}

/// Exhaustive restricted-strategy search: cut (0, L] into contiguous grid
/// intervals, give every interval one scheme and an integer pipeline count d,
/// subject to sum d * gpus <= n and MaxLen >= the interval top. Score is the
/// max over intervals of (sum of T over lengths in the interval) / d.
inline double restricted_strategy_search(const std::vector<Tokens>& lengths, const std::vector<SchemeCost>& schemes,
                                         int n_gpus, int l_points, Tokens l_step) {
  auto interval_cost = [&](const LatencyCoeffs& c, Tokens lo, Tokens hi) {
    double s = 0;
    for (Tokens x : lengths)
      if (x > lo && x <= hi) s += T(c, x);
    return s;
  };
  if (l_points == 0) return 0;  // nothing to serve
  double best = kInf;
  // Bit p set: a cut after grid point p (1 <= p < l_points).
  for (std::uint32_t cuts = 0; cuts < (1u << (l_points - 1)); ++cuts) {
    std::vector<std::pair<int, int>> iv;
    int lo = 0;
    for (int p = 1; p < l_points; ++p)
      if (cuts & (1u << (p - 1))) {
        iv.push_back({lo, p});
        lo = p;
      }
    iv.push_back({lo, l_points});
    std::function<void(std::size_t, int, double)> rec = [&](std::size_t k, int used, double mx) {
      if (mx >= best) return;
      if (k == iv.size()) {
        best = mx;
        return;
      }
      const Tokens a = iv[k].first * l_step, b = iv[k].second * l_step;
      for (const auto& s : schemes) {
        if (s.max_len < b) continue;
        const double c = interval_cost(s.coeffs, a, b);
        for (int d = 1; used + d * s.scheme.gpus() <= n_gpus; ++d) rec(k + 1, used + d * s.scheme.gpus(), std::max(mx, c / d));
      }
    };
    rec(0, 0, 0);
  }
  return best;
}

/// Every multiset of `schemes` using between 1 and n_gpus GPUs, canonical form.
inline std::vector<hydra::Strategy> enumerate_strategies(const std::vector<ParallelScheme>& schemes, int n_gpus) {
  std::vector<hydra::Strategy> out;
  hydra::Strategy cur;
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
    if (k == schemes.size()) {
      if (!cur.terms.empty()) out.push_back(hydra::canonical(cur));
      return;
    }
    rec(k + 1, left);
    const int g = schemes[k].gpus();
    for (int c = 1; c * g <= left; ++c) {
      cur.terms.push_back({schemes[k], c});
      rec(k + 1, left - c * g);
      cur.terms.pop_back();
    }
  };
  rec(0, n_gpus);
  return out;
}

/// One operation of a pipeline schedule DAG.
struct Op {
  int stage;
  int mb;
  bool forward;
};

/// Longest path through the 1F1B dependency graph, found by walking every
/// path. Edges: consecutive ops on one stage (in 1F1B order), F(s-1, j) ->
/// F(s, j), F(last, j) -> B(last, j), B(s+1, j) -> B(s, j). Returns the
/// latest finish among stage-0 backward ops.
inline double longest_schedule_path(const std::vector<double>& times, int pp, double forward_fraction) {
  const int v = static_cast<int>(times.size());
  // Per-stage op order written out independently of the simulator.
  std::vector<std::vector<Op>> order(static_cast<std::size_t>(pp));
  for (int s = 0; s < pp; ++s) {
    const int warm = std::min(pp - 1 - s, v);
    auto& o = order[static_cast<std::size_t>(s)];
    for (int j = 0; j < warm; ++j) o.push_back({s, j, true});
    for (int j = 0; j < v; ++j) {
      if (warm + j < v) o.push_back({s, warm + j, true});
      o.push_back({s, j, false});
    }
  }
  auto id = [&](const Op& op) { return (op.stage * v + op.mb) * 2 + (op.forward ? 0 : 1); };
  const int n = pp * v * 2;
  std::vector<std::vector<int>> preds(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int s = 0; s < pp; ++s) {
    const auto& o = order[static_cast<std::size_t>(s)];
    for (std::size_t k = 0; k < o.size(); ++k) {
      const int me = id(o[k]);
      const double t = times[static_cast<std::size_t>(o[k].mb)];
      w[static_cast<std::size_t>(me)] = o[k].forward ? forward_fraction * t : t - forward_fraction * t;
      if (k > 0) preds[static_cast<std::size_t>(me)].push_back(id(o[k - 1]));
      if (o[k].forward && s > 0) preds[static_cast<std::size_t>(me)].push_back(id({s - 1, o[k].mb, true}));
      if (!o[k].forward) {
        if (s == pp - 1) preds[static_cast<std::size_t>(me)].push_back(id({s, o[k].mb, true}));
        else preds[static_cast<std::size_t>(me)].push_back(id({s + 1, o[k].mb, false}));
      }
    }
  }
  // Plain recursion over all paths ending at `x` (no memoisation).
  std::function<double(int)> longest = [&](int x) {
    double best = 0;
    for (int p : preds[static_cast<std::size_t>(x)]) best = std::max(best, longest(p));
    return best + w[static_cast<std::size_t>(x)];
  };
  double out = 0;
  for (int j = 0; j < v; ++j) out = std::max(out, longest(id({0, j, false})));
  return out;
}

}  // namespace oracle
