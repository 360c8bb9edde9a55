// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/common.hpp"

namespace hydra {

/// One pipeline configuration <tp, pp, cp>.
struct ParallelScheme {
  int tp = 1;
  int pp = 1;
  int cp = 1;

  auto operator<=>(const ParallelScheme&) const = default;

  int gpus() const { return tp * pp * cp; }
  std::string to_string() const {
    return std::to_string(tp) + "x" + std::to_string(pp) + "x" + std::to_string(cp);
  }
};

inline int gpus(const ParallelScheme& s) { return s.gpus(); }

namespace detail {

inline int parse_positive_int(std::string_view s, std::string_view context) {
  if (s.empty()) throw ParseError("empty number in '" + std::string(context) + "'");
  long long v = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9') throw ParseError("bad number '" + std::string(s) + "' in '" + std::string(context) + "'");
    v = v * 10 + (ch - '0');
    if (v > 1'000'000'000) throw ParseError("number too large in '" + std::string(context) + "'");
  }
  if (v < 1) throw ParseError("expected a positive integer in '" + std::string(context) + "'");
  return static_cast<int>(v);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses "TPxPPxCP", e.g. "2x4x1".
inline ParallelScheme parse_scheme(std::string_view text) {
  text = detail::trim(text);
  const auto x1 = text.find('x');
  const auto x2 = x1 == std::string_view::npos ? x1 : text.find('x', x1 + 1);
  if (x1 == std::string_view::npos || x2 == std::string_view::npos || text.find('x', x2 + 1) != std::string_view::npos) {
    throw ParseError("scheme must look like TPxPPxCP, got '" + std::string(text) + "'");
  }
  return ParallelScheme{detail::parse_positive_int(text.substr(0, x1), text),
                        detail::parse_positive_int(text.substr(x1 + 1, x2 - x1 - 1), text),
                        detail::parse_positive_int(text.substr(x2 + 1), text)};
}

struct StrategyTerm {
  ParallelScheme scheme;
  int count = 1;

  bool operator==(const StrategyTerm&) const = default;
};

/// Linear combination sum_i d_i * P_i. Term order is meaningful: it is the
/// pipeline order used for dispatch and GPU numbering.
struct Strategy {
  std::vector<StrategyTerm> terms;

  bool operator==(const Strategy&) const = default;

  int total_gpus() const {
    int n = 0;
    for (const auto& t : terms) n += t.count * t.scheme.gpus();
    return n;
  }
  /// D: number of pipelines.
  int pipeline_count() const {
    int d = 0;
    for (const auto& t : terms) d += t.count;
    return d;
  }
  /// D_cp = sum_i d_i * CP(P_i).
  int cp_weighted_count() const {
    int d = 0;
    for (const auto& t : terms) d += t.count * t.scheme.cp;
    return d;
  }
  int tp_max() const {
    int m = 0;
    for (const auto& t : terms) m = std::max(m, t.scheme.tp);
    return m;
  }
  bool homogeneous() const {
    std::set<ParallelScheme> distinct;
    for (const auto& t : terms) distinct.insert(t.scheme);
    return distinct.size() == 1;
  }
  /// Expanded pipeline list in term order.
  std::vector<ParallelScheme> pipelines() const {
    std::vector<ParallelScheme> out;
    for (const auto& t : terms)
      for (int i = 0; i < t.count; ++i) out.push_back(t.scheme);
    return out;
  }
  std::string to_string() const {
    std::string s;
    for (const auto& t : terms) {
      if (!s.empty()) s += "+";
      s += t.scheme.to_string() + "*" + std::to_string(t.count);
    }
    return s;
  }
};

inline Strategy homogeneous_strategy(const ParallelScheme& scheme, int count) {
  return Strategy{{StrategyTerm{scheme, count}}};
}

/// Parses "2x4x1*2+1x1x1*8". A term without "*count" means count 1.
inline Strategy parse_strategy(std::string_view text) {
  text = detail::trim(text);
  if (text.empty()) throw ParseError("empty strategy");
  Strategy s;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto plus = text.find('+', pos);
    if (plus == std::string_view::npos) plus = text.size();
    const auto term = detail::trim(text.substr(pos, plus - pos));
    if (term.empty()) throw ParseError("empty term in strategy '" + std::string(text) + "'");
    const auto star = term.find('*');
    StrategyTerm t;
    if (star == std::string_view::npos) {
      t.scheme = parse_scheme(term);
    } else {
      t.scheme = parse_scheme(term.substr(0, star));
      t.count = detail::parse_positive_int(detail::trim(term.substr(star + 1)), text);
    }
    s.terms.push_back(t);
    pos = plus + 1;
  }
  return s;
}

/// Merges repeated schemes and orders terms by scheme, largest first. Two
/// strategies describing the same multiset share one canonical form.
inline Strategy canonical(const Strategy& s) {
  std::map<ParallelScheme, int, std::greater<>> merged;
  for (const auto& t : s.terms)
    if (t.count > 0) merged[t.scheme] += t.count;
  Strategy out;
  for (const auto& [scheme, count] : merged) out.terms.push_back({scheme, count});
  return out;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v;
    }
    return s;
  }
};

/// Checks the GPU budget and per-term invariants. n_layers <= 0 skips the
/// pp-divisibility check.
inline ValidationReport validate_strategy(const Strategy& s, int n_gpus, int n_layers = 0) {
  ValidationReport r;
  if (s.terms.empty()) r.violations.push_back("strategy has no terms");
  for (const auto& t : s.terms) {
    const auto name = t.scheme.to_string();
    if (t.scheme.tp < 1 || t.scheme.pp < 1 || t.scheme.cp < 1) r.violations.push_back(name + ": degrees must be >= 1");
    if (t.count < 1) r.violations.push_back(name + ": count must be >= 1");
    if (t.scheme.gpus() > n_gpus)
      r.violations.push_back(name + ": needs " + std::to_string(t.scheme.gpus()) + " GPUs > N=" + std::to_string(n_gpus));
    if (n_layers > 0 && t.scheme.pp >= 1 && n_layers % t.scheme.pp != 0)
      r.violations.push_back(name + ": pp=" + std::to_string(t.scheme.pp) + " does not divide " + std::to_string(n_layers) +
                             " layers");
  }
  const int used = s.total_gpus();
  if (used > n_gpus)
    r.violations.push_back("uses " + std::to_string(used) + " GPUs > N=" + std::to_string(n_gpus));
  return r;
}

inline std::vector<int> powers_of_two_upto(int n) {
  std::vector<int> out;
  for (int v = 1; v <= n; v *= 2) out.push_back(v);
  return out;
}

inline std::vector<int> divisors_of(int n) {
  std::vector<int> out;
  for (int v = 1; v <= n; ++v)
    if (n % v == 0) out.push_back(v);
  return out;
}

/// Every <tp, pp, cp> from the domains with tp*pp*cp <= N and pp | layers,
/// ordered tp-major, then pp, then cp.
inline std::vector<ParallelScheme> enumerate_schemes(int n_gpus, int n_layers, const std::vector<int>& tp_domain,
                                                     const std::vector<int>& pp_domain,
                                                     const std::vector<int>& cp_domain) {
  if (n_gpus < 1) throw InvalidArgument("enumerate_schemes: n_gpus must be >= 1");
  if (n_layers < 1) throw InvalidArgument("enumerate_schemes: n_layers must be >= 1");
  if (tp_domain.empty() || pp_domain.empty() || cp_domain.empty())
    throw InvalidArgument("enumerate_schemes: domains must be nonempty");
  const std::set<int> tps(tp_domain.begin(), tp_domain.end());
  const std::set<int> pps(pp_domain.begin(), pp_domain.end());
  const std::set<int> cps(cp_domain.begin(), cp_domain.end());
  std::vector<ParallelScheme> out;
  for (int tp : tps)
    for (int pp : pps)
      for (int cp : cps) {
        if (tp < 1 || pp < 1 || cp < 1) continue;
        if (static_cast<long long>(tp) * pp * cp > n_gpus) continue;
        if (n_layers % pp != 0) continue;
        out.push_back({tp, pp, cp});
      }
  if (out.empty()) throw InvalidArgument("enumerate_schemes: no valid scheme for N=" + std::to_string(n_gpus));
  return out;
}

/// Powers of two for tp and cp, divisors of the layer count for pp.
inline std::vector<ParallelScheme> enumerate_default_schemes(int n_gpus, int n_layers) {
  return enumerate_schemes(n_gpus, n_layers, powers_of_two_upto(n_gpus), divisors_of(n_layers),
                           powers_of_two_upto(n_gpus));
}

}  // namespace hydra
