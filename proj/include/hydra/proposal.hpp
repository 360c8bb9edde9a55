// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"
#include "hydra/scheme.hpp"
#include "hydra/workload.hpp"

namespace hydra {

struct DpSteps {
  double n_step = 0.1;
  double d_step = 0.1;
  Tokens l_step = 128;

  static DpSteps integer(Tokens l_step = 128) { return {1.0, 1.0, l_step}; }
};

/// Sum of T(x, P) over histogram lengths in (lo, hi], from per-bin moments.
class IntervalCosts {
 public:
  IntervalCosts() = default;

  /// Only bins entirely below l_max are kept; l_max must be a multiple of the bin width.
  IntervalCosts(const LengthHistogram& h, Tokens l_max) : bin_width_(h.bin_width) {
    if (l_max % h.bin_width != 0) throw InvalidArgument("l_max must be a multiple of the histogram bin width");
    const std::size_t nb = static_cast<std::size_t>(l_max / h.bin_width);
    count_.assign(nb + 1, 0);
    first_.assign(nb + 1, 0);
    second_.assign(nb + 1, 0);
    for (std::size_t k = 0; k < nb; ++k) {
      const bool in = k < h.bins();
      count_[k + 1] = count_[k] + (in ? static_cast<double>(h.counts[k]) : 0);
      first_[k + 1] = first_[k] + (in ? h.first_moment(k) : 0);
      second_[k + 1] = second_[k] + (in ? h.second_moment(k) : 0);
    }
  }

  /// lo and hi are token positions, multiples of the bin width.
  double cost(const LatencyCoeffs& c, Tokens lo, Tokens hi) const {
    const auto a = static_cast<std::size_t>(lo / bin_width_), b = static_cast<std::size_t>(hi / bin_width_);
    return c.a * (second_[b] - second_[a]) + c.b * (first_[b] - first_[a]) + c.c * (count_[b] - count_[a]);
  }

  double count(Tokens lo, Tokens hi) const {
    return count_[static_cast<std::size_t>(hi / bin_width_)] - count_[static_cast<std::size_t>(lo / bin_width_)];
  }

 private:
  Tokens bin_width_ = 1;
  std::vector<double> count_, first_, second_;
};

/// One interval of a DP solution: d pipelines of `scheme` share the lengths in (lo, hi].
struct DpInterval {
  ParallelScheme scheme;
  double count = 0;
  Tokens lo = 0;
  Tokens hi = 0;
  double cost = 0;  // sum of T over the interval
};

struct FractionalTerm {
  ParallelScheme scheme;
  double count = 0;
};

/// t[n][l] over a scaled-integer grid: n in units of n_step GPUs, l in units of l_step tokens.
struct DpTable {
  struct Choice {
    int k = -1;        // scheme index; -1 = carried from n - 1; -2 = base state
    int d_units = 0;   // pipelines in units of n_step
    int l_back = 0;    // interval width in l-grid steps
  };

  DpSteps steps;
  int scale = 1;        // grid units per GPU
  int d_units = 1;      // d_step in grid units
  int n_units = 0;      // N * scale
  int l_points = 0;     // l_max / l_step
  std::vector<SchemeCost> schemes;
  std::vector<double> t;
  std::vector<Choice> choice;
  IntervalCosts costs;

  std::size_t idx(int n, int l) const { return static_cast<std::size_t>(n) * (l_points + 1) + static_cast<std::size_t>(l); }
  double at(int n, int l) const { return t[idx(n, l)]; }
  /// Value at N GPUs and ceiling L * l_step.
  double at_full(int l) const { return at(n_units, l); }

  /// Interval decomposition of S[n][l], lowest interval first.
  std::vector<DpInterval> intervals(int n, int l) const {
    std::vector<DpInterval> out;
    while (l > 0 && n > 0) {
      const Choice& c = choice[idx(n, l)];
      if (c.k == -1) {
        --n;
        continue;
      }
      if (c.k < 0) break;
      const auto& sc = schemes[static_cast<std::size_t>(c.k)];
      const Tokens hi = static_cast<Tokens>(l) * steps.l_step, lo = static_cast<Tokens>(l - c.l_back) * steps.l_step;
      out.push_back({sc.scheme, static_cast<double>(c.d_units) / scale, lo, hi, costs.cost(sc.coeffs, lo, hi)});
      n -= c.d_units * sc.scheme.gpus();
      l -= c.l_back;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  /// S[n][l] with repeated schemes merged, in canonical scheme order.
  std::vector<FractionalTerm> strategy(int n, int l) const {
    std::map<ParallelScheme, int, std::greater<>> units;
    for (int nn = n, ll = l; ll > 0 && nn > 0;) {
      const Choice& c = choice[idx(nn, ll)];
      if (c.k == -1) {
        --nn;
        continue;
      }
      if (c.k < 0) break;
      const auto& sc = schemes[static_cast<std::size_t>(c.k)];
      units[sc.scheme] += c.d_units;
      nn -= c.d_units * sc.scheme.gpus();
      ll -= c.l_back;
    }
    std::vector<FractionalTerm> out;
    for (const auto& [s, u] : units) out.push_back({s, static_cast<double>(u) / scale});
    return out;
  }
};

namespace detail {

inline int grid_ratio(double step, double unit, const char* what) {
  const double r = step / unit;
  const long long ri = std::llround(r);
  if (ri < 1 || std::abs(r - static_cast<double>(ri)) > 1e-9) throw InvalidArgument(std::string(what));
  return static_cast<int>(ri);
}

}  // namespace detail

/// Fills the table for all n <= N, l <= l_max:
///   t[n][l] = min(t[n-1][l], min_{k,d,l'} max(t[n - d g_k][l - l'], cost_k(l - l', l] / d))
/// over schemes with MaxLen >= l and d g_k <= n, 1 <= l' <= l.
inline DpTable dp_solve(const LengthHistogram& hist, int n_gpus, Tokens l_max, const std::vector<SchemeCost>& schemes,
                        const DpSteps& steps = {}) {
  if (n_gpus < 1) throw InvalidArgument("dp_solve: n_gpus must be >= 1");
  if (steps.l_step < 1 || l_max < steps.l_step || l_max % steps.l_step != 0)
    throw InvalidArgument("dp_solve: l_max must be a positive multiple of l_step");
  if (steps.l_step % hist.bin_width != 0)
    throw InvalidArgument("dp_solve: histogram bin width must divide l_step");
  DpTable tb;
  tb.steps = steps;
  tb.scale = detail::grid_ratio(1.0, steps.n_step, "dp_solve: 1 / n_step must be an integer");
  tb.d_units = detail::grid_ratio(steps.d_step, steps.n_step, "dp_solve: d_step must be a multiple of n_step");
  tb.n_units = n_gpus * tb.scale;
  tb.l_points = static_cast<int>(l_max / steps.l_step);
  tb.schemes = schemes;
  tb.costs = IntervalCosts(hist, l_max);
  const int L = tb.l_points;
  tb.t.assign(static_cast<std::size_t>(tb.n_units + 1) * (L + 1), kInfinity);
  tb.choice.assign(tb.t.size(), {});

  // Interval cost per scheme for every (lo, hi) grid pair.
  const std::size_t K = schemes.size();
  std::vector<double> icost(K * (L + 1) * (L + 1), 0);
  auto ic = [&](std::size_t k, int lo, int hi) -> double& {
    return icost[(k * (L + 1) + static_cast<std::size_t>(lo)) * (L + 1) + static_cast<std::size_t>(hi)];
  };
  for (std::size_t k = 0; k < K; ++k)
    for (int lo = 0; lo <= L; ++lo)
      for (int hi = lo + 1; hi <= L; ++hi)
        ic(k, lo, hi) = tb.costs.cost(schemes[k].coeffs, lo * steps.l_step, hi * steps.l_step);

  for (int n = 0; n <= tb.n_units; ++n) {
    tb.t[tb.idx(n, 0)] = 0;
    tb.choice[tb.idx(n, 0)].k = -2;
  }
  for (int l = 1; l <= L; ++l) tb.choice[tb.idx(0, l)].k = -2;

  for (int n = 1; n <= tb.n_units; ++n) {
    for (int l = 1; l <= L; ++l) {
      double best = tb.at(n - 1, l);
      DpTable::Choice ch{-1, 0, 0};
      const Tokens ceiling = static_cast<Tokens>(l) * steps.l_step;
      for (std::size_t k = 0; k < K; ++k) {
        if (schemes[k].max_len < ceiling) continue;
        const int unit_cost = tb.d_units * schemes[k].scheme.gpus();  // grid units per d_step
        const int mmax = n / unit_cost;
        if (mmax < 1) continue;
        for (int lb = 1; lb <= l; ++lb) {
          const double c = ic(k, l - lb, l);
          auto f = [&](int m) { return tb.at(n - m * unit_cost, l - lb); };
          auto g = [&](int m) { return c * tb.scale / (static_cast<double>(m) * tb.d_units); };
          // f non-decreasing, g non-increasing in m: the min of max(f, g) sits at the crossing.
          int lo = 1, hi = mmax + 1;
          while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (f(mid) >= g(mid)) hi = mid;
            else lo = mid + 1;
          }
          for (int m : {lo - 1, lo}) {
            if (m < 1 || m > mmax) continue;
            const double v = std::max(f(m), g(m));
            if (v < best) {
              best = v;
              ch = {static_cast<int>(k), m * tb.d_units, lb};
            }
          }
        }
      }
      tb.t[tb.idx(n, l)] = best;
      tb.choice[tb.idx(n, l)] = ch;
    }
  }
  return tb;
}

/// Best restricted assignment of a fixed integer strategy to the lengths in
/// (0, l_ceiling]: contiguous length intervals, each served by d pipelines of
/// one scheme with MaxLen >= the interval top; score is the max over intervals
/// of cost / d. Infinite when the strategy cannot cover the ceiling.
inline double strategy_dp_score(const Strategy& strategy, const IntervalCosts& costs, Tokens l_ceiling, Tokens l_step,
                                const CostProfile& profile) {
  const Strategy s = canonical(strategy);
  const std::size_t K = s.terms.size();
  const int L = static_cast<int>(l_ceiling / l_step);
  std::vector<int> radix(K), stride(K);
  std::size_t states = 1;
  for (std::size_t k = 0; k < K; ++k) {
    radix[k] = s.terms[k].count + 1;
    stride[k] = static_cast<int>(states);
    states *= static_cast<std::size_t>(radix[k]);
  }
  std::vector<SchemeCost> sc;
  for (const auto& t : s.terms) sc.push_back(profile.cost(t.scheme));
  // f[state][l]: state encodes remaining pipelines per scheme.
  std::vector<double> f(states * (L + 1), kInfinity);
  auto F = [&](std::size_t st, int l) -> double& { return f[st * (L + 1) + static_cast<std::size_t>(l)]; };
  for (std::size_t st = 0; st < states; ++st) {
    F(st, 0) = 0;
    std::vector<int> cnt(K);
    for (std::size_t k = 0; k < K; ++k) cnt[k] = static_cast<int>(st / stride[k]) % radix[k];
    for (int l = 1; l <= L; ++l) {
      double best = kInfinity;
      const Tokens ceiling = static_cast<Tokens>(l) * l_step;
      for (std::size_t k = 0; k < K; ++k) {
        if (cnt[k] < 1 || sc[k].max_len < ceiling) continue;
        for (int lb = 1; lb <= l; ++lb) {
          const double c = costs.cost(sc[k].coeffs, static_cast<Tokens>(l - lb) * l_step, ceiling);
          auto fm = [&](int m) { return F(st - static_cast<std::size_t>(m) * stride[k], l - lb); };
          auto gm = [&](int m) { return c / m; };
          int lo = 1, hi = cnt[k] + 1;
          while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (fm(mid) >= gm(mid)) hi = mid;
            else lo = mid + 1;
          }
          for (int m : {lo - 1, lo}) {
            if (m < 1 || m > cnt[k]) continue;
            best = std::min(best, std::max(fm(m), gm(m)));
          }
        }
      }
      F(st, l) = best;
    }
  }
  return F(states - 1, L);
}

struct Candidate {
  Strategy strategy;
  Tokens provenance_l = 0;                 // grid ceiling the strategy was rounded from
  std::vector<FractionalTerm> fractional;  // S[N][L] before rounding
  double dp_score = kInfinity;             // restricted integer score at provenance_l
  double relaxed_score = kInfinity;        // fractional t[N][provenance_l]
  bool safety = false;                     // injected homogeneous fallback
};

struct CandidateSet {
  std::vector<Candidate> candidates;

  std::vector<Strategy> strategies() const {
    std::vector<Strategy> out;
    for (const auto& c : candidates) out.push_back(c.strategy);
    return out;
  }
};

struct ProposeOptions {
  DpSteps steps;
  std::size_t cap = 16;
};

/// All floor/ceil roundings of a fractional solution that fit in N GPUs, zero terms dropped.
inline std::vector<Strategy> round_fractional(const std::vector<FractionalTerm>& terms, int n_gpus) {
  std::vector<std::vector<int>> options;
  for (const auto& t : terms) {
    const double lo = std::floor(t.count + 1e-9), hi = std::ceil(t.count - 1e-9);
    std::vector<int> o{static_cast<int>(lo)};
    if (hi != lo) o.push_back(static_cast<int>(hi));
    options.push_back(o);
  }
  std::vector<Strategy> out;
  std::set<std::string> seen;
  std::vector<std::size_t> pick(terms.size(), 0);
  for (;;) {
    Strategy s;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const int c = options[k][pick[k]];
      if (c > 0) s.terms.push_back({terms[k].scheme, c});
    }
    s = canonical(s);
    if (!s.terms.empty() && s.total_gpus() <= n_gpus && seen.insert(s.to_string()).second) out.push_back(s);
    std::size_t k = 0;
    while (k < terms.size() && ++pick[k] == options[k].size()) pick[k++] = 0;
    if (k == terms.size()) break;
  }
  return out;
}

/// Candidate set: rounded S[N][L] for every grid L, plus the best homogeneous
/// strategy able to hold l_max. Capped by rounding loss (dp_score / relaxed_score).
inline CandidateSet propose(const LengthHistogram& hist, int n_gpus, Tokens l_max,
                            const std::vector<ParallelScheme>& schemes, const CostProfile& profile,
                            const ProposeOptions& options = {}) {
  std::vector<SchemeCost> usable;
  for (const auto& s : schemes)
    if (s.gpus() <= n_gpus && profile.max_len(s) >= 1) usable.push_back(profile.cost(s));
  const Tokens l_step = options.steps.l_step;
  const DpTable tb = dp_solve(hist, n_gpus, l_max, usable, options.steps);

  std::map<std::string, Candidate> found;
  auto supports = [&](const Strategy& s, Tokens L) {
    Tokens m = 0;
    for (const auto& t : s.terms) m = std::max(m, profile.max_len(t.scheme));
    return m >= L;
  };
  for (int l = 1; l <= tb.l_points; ++l) {
    if (!std::isfinite(tb.at_full(l))) continue;
    const Tokens L = static_cast<Tokens>(l) * l_step;
    const auto frac = tb.strategy(tb.n_units, l);
    for (auto& s : round_fractional(frac, n_gpus)) {
      if (!supports(s, L)) continue;
      auto& c = found[s.to_string()];
      if (c.strategy.terms.empty() || L > c.provenance_l) {
        c.strategy = s;
        c.provenance_l = L;
        c.fractional = frac;
        c.relaxed_score = tb.at_full(l);
      }
    }
  }

  // Safety: floor(N / g) copies of the best scheme that holds l_max.
  std::optional<Candidate> safety;
  for (const auto& sc : usable) {
    if (sc.max_len < l_max) continue;
    Candidate c;
    c.strategy = homogeneous_strategy(sc.scheme, n_gpus / sc.scheme.gpus());
    c.provenance_l = l_max;
    c.safety = true;
    c.dp_score = strategy_dp_score(c.strategy, tb.costs, l_max, l_step, profile);
    c.relaxed_score = tb.at_full(tb.l_points);
    if (!safety || c.dp_score < safety->dp_score ||
        (c.dp_score == safety->dp_score &&
         (c.strategy.total_gpus() < safety->strategy.total_gpus() ||
          (c.strategy.total_gpus() == safety->strategy.total_gpus() &&
           c.strategy.to_string() < safety->strategy.to_string()))))
      safety = c;
  }
  if (!safety) throw InfeasibleError("propose: no scheme can hold l_max = " + std::to_string(l_max));

  std::vector<Candidate> pool;
  for (auto& [text, c] : found) {
    if (text == safety->strategy.to_string()) continue;
    c.dp_score = strategy_dp_score(c.strategy, tb.costs, c.provenance_l, l_step, profile);
    pool.push_back(std::move(c));
  }
  auto loss = [](const Candidate& c) {
    return c.relaxed_score > 0 ? c.dp_score / c.relaxed_score : (c.dp_score > 0 ? kInfinity : 1.0);
  };
  std::sort(pool.begin(), pool.end(), [&](const Candidate& a, const Candidate& b) {
    const double la = loss(a), lb = loss(b);
    if (la != lb) return la < lb;
    if (a.provenance_l != b.provenance_l) return a.provenance_l > b.provenance_l;
    if (a.strategy.total_gpus() != b.strategy.total_gpus()) return a.strategy.total_gpus() < b.strategy.total_gpus();
    return a.strategy.to_string() < b.strategy.to_string();
  });
  CandidateSet out;
  out.candidates.push_back(*safety);
  for (auto& c : pool) {
    if (out.candidates.size() >= std::max<std::size_t>(options.cap, 1)) break;
    out.candidates.push_back(std::move(c));
  }
  return out;
}

}  // namespace hydra
