// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/scheme.hpp"

namespace hydra {

struct ModelShape {
  std::int64_t hidden = 4096;
  std::int64_t layers = 32;
  std::int64_t vocab = 32000;
};

struct HardwareSpec {
  int n_gpus = 16;
  double gpu_memory = 80e9;   // bytes
  double flops = 312e12;      // half precision ops/s
  double bandwidth = 200e9;   // bytes/s, slowest link
  double safety_margin = 4e9; // bytes
};

struct MemoryConstants {
  double act_const = 34;     // bytes per token per hidden unit per layer
  double state_const = 192;  // bytes per H^2 per layer
  double alpha = 0.75;
  double embed_factor = 2;   // bytes per embedding entry
};

/// T(l) = a*l^2 + b*l + c, seconds.
struct LatencyCoeffs {
  double a = 0;
  double b = 0;
  double c = 0;

  bool operator==(const LatencyCoeffs&) const = default;

  double operator()(double l) const { return (a * l + b) * l + c; }
};

/// Everything the assignment solvers need about one scheme.
struct SchemeCost {
  ParallelScheme scheme;
  LatencyCoeffs coeffs;
  Tokens max_len = 0;
  Tokens util_len = 1;

  Seconds latency(Tokens l) const { return coeffs(static_cast<double>(l)); }
  int pp() const { return scheme.pp; }
};

inline void validate_shape(const ModelShape& m) {
  if (m.hidden < 1 || m.layers < 1 || m.vocab < 1) throw InvalidArgument("model shape entries must be positive");
}

inline void validate_hardware(const HardwareSpec& h) {
  if (h.n_gpus < 1) throw InvalidArgument("n_gpus must be >= 1");
  if (!(h.gpu_memory > 0) || !(h.flops > 0) || !(h.bandwidth > 0) || !(h.safety_margin >= 0))
    throw InvalidArgument("hardware spec entries must be positive");
  if (!(h.safety_margin < h.gpu_memory)) throw InvalidArgument("safety_margin must be < gpu_memory");
}

inline void validate_memory(const MemoryConstants& m) {
  if (!(m.act_const > 0) || !(m.state_const > 0)) throw InvalidArgument("memory constants must be positive");
  if (!(m.alpha >= 0 && m.alpha <= 1)) throw InvalidArgument("alpha must be in [0, 1]");
  if (!(m.embed_factor >= 0)) throw InvalidArgument("embed_factor must be >= 0");
}

/// Model-state bytes resident on one GPU of `scheme`.
inline double state_bytes(const ParallelScheme& s, const ModelShape& m, const HardwareSpec& hw,
                          const MemoryConstants& k) {
  const double H = static_cast<double>(m.hidden);
  const double L = static_cast<double>(m.layers);
  const double V = static_cast<double>(m.vocab);
  const double N = hw.n_gpus;
  return L * H * H / N * k.state_const * k.alpha + (L / s.pp) * (H * H / s.tp) * k.state_const * (1 - k.alpha) +
         H * V / N * k.embed_factor * k.alpha + H * V / s.tp * k.embed_factor * (1 - k.alpha);
}

/// Activation bytes per token of packed sequence.
inline double activation_bytes_per_token(const ParallelScheme& s, const ModelShape& m, const MemoryConstants& k) {
  return static_cast<double>(m.layers) * static_cast<double>(m.hidden) / (s.tp * s.cp) * k.act_const;
}

/// Largest l with activation(l) + state <= memory - margin; 0 when nothing fits.
inline Tokens max_len_or_zero(const ParallelScheme& s, const ModelShape& m, const HardwareSpec& hw,
                              const MemoryConstants& k) {
  const double free = (hw.gpu_memory - hw.safety_margin) - state_bytes(s, m, hw, k);
  if (!(free > 0)) return 0;
  const double per_token = activation_bytes_per_token(s, m, k);
  double l = std::floor(free / per_token);
  // floor of a quotient can land one off in either direction; settle on the integer test.
  while (l >= 1 && per_token * l > free) l -= 1;
  while (per_token * (l + 1) <= free) l += 1;
  return static_cast<Tokens>(l);
}

inline Tokens max_len(const ParallelScheme& s, const ModelShape& m, const HardwareSpec& hw,
                      const MemoryConstants& k) {
  const Tokens l = max_len_or_zero(s, m, hw, k);
  if (l < 1) {
    throw InfeasibleError("scheme " + s.to_string() + " has no memory left for activations (state " +
                          std::to_string(state_bytes(s, m, hw, k)) + " B of budget " +
                          std::to_string(hw.gpu_memory - hw.safety_margin) + " B)");
  }
  return l;
}

/// Tokens per second of T at l; infinite when T(l) <= 0.
inline double efficiency(const LatencyCoeffs& c, Tokens l) {
  const double t = c(static_cast<double>(l));
  return t > 0 ? static_cast<double>(l) / t : kInfinity;
}

/// Smallest l <= max_len with efficiency(l) >= threshold * peak efficiency on [1, max_len].
inline Tokens util_len(const LatencyCoeffs& c, Tokens max_len, double threshold = 0.85) {
  if (!(threshold > 0 && threshold <= 1)) throw InvalidArgument("util_len threshold must be in (0, 1]");
  if (max_len < 1) throw InvalidArgument("util_len needs max_len >= 1");
  if (!(c(1.0) > 0)) return 1;

  // Efficiency l / (a l^2 + b l + c) rises up to sqrt(c/a) and falls after.
  Tokens peak_l;
  if (c.a > 0 && c.c > 0) {
    const double lstar = std::sqrt(c.c / c.a);
    const Tokens lo = std::clamp<Tokens>(static_cast<Tokens>(std::floor(lstar)), 1, max_len);
    const Tokens hi = std::clamp<Tokens>(lo + 1, 1, max_len);
    peak_l = efficiency(c, hi) > efficiency(c, lo) ? hi : lo;
  } else if (c.a > 0) {
    peak_l = 1;
  } else {
    peak_l = max_len;
  }
  const double target = threshold * efficiency(c, peak_l);
  auto meets = [&](Tokens l) { return efficiency(c, l) >= target; };

  Tokens lo = 1, hi = peak_l;
  while (lo < hi) {
    const Tokens mid = lo + (hi - lo) / 2;
    if (meets(mid)) hi = mid;
    else lo = mid + 1;
  }
  if (meets(lo) && (lo == 1 || !meets(lo - 1))) return lo;
  for (Tokens l = 1; l <= max_len; ++l)
    if (meets(l)) return l;
  return max_len;
}

/// ceil(tp * cp * F / B). Values within 1e-12 relative of an integer count as
/// that integer so products like 16 * 19.5e12 / 200e9 are not pushed up by rounding.
inline Tokens overlap_threshold(const ParallelScheme& s, double flops, double bandwidth) {
  if (!(bandwidth > 0)) throw InvalidArgument("bandwidth must be positive");
  const double x = static_cast<double>(s.tp) * s.cp * flops / bandwidth;
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<Tokens>(r);
  return static_cast<Tokens>(std::ceil(x));
}

inline Tokens overlap_threshold(const ParallelScheme& s, const HardwareSpec& hw) {
  return overlap_threshold(s, hw.flops, hw.bandwidth);
}

inline bool overlap_feasible(const ParallelScheme& s, Tokens tokens_per_microbatch, const HardwareSpec& hw) {
  return tokens_per_microbatch >= overlap_threshold(s, hw);
}

// ---------------------------------------------------------------------------
// Fitting.
// ---------------------------------------------------------------------------

struct ProfileSample {
  Tokens l = 0;
  Seconds t = 0;
};

struct FitResult {
  LatencyCoeffs coeffs;
  double weighted_rms = 0;   // RMS of (fit - t) / t
  double max_rel_error = 0;  // max |fit - t| / t
  int support = 0;           // bit 0 = a, bit 1 = b, bit 2 = c
};

/// Non-negative least squares on {l^2, l, 1}, minimizing relative error. NNLS is
/// solved exactly by enumerating the 7 supports.
inline FitResult fit_latency(const std::vector<ProfileSample>& samples) {
  std::set<Tokens> distinct;
  for (const auto& s : samples) {
    if (s.l < 0) throw InvalidArgument("fit_latency: negative length");
    if (!(s.t > 0) || !std::isfinite(s.t)) throw InvalidArgument("fit_latency: times must be positive and finite");
    distinct.insert(s.l);
  }
  if (samples.size() < 3 || distinct.size() < 3) {
    throw InvalidArgument("fit_latency: rank deficient, need >= 3 samples at >= 3 distinct lengths (got " +
                          std::to_string(distinct.size()) + ")");
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  const double scale = static_cast<double>(*distinct.rbegin() > 0 ? *distinct.rbegin() : 1);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 1.0 / samples[i].t;
    const double x = static_cast<double>(samples[i].l) / scale;
    X(i, 0) = x * x * w;
    X(i, 1) = x * w;
    X(i, 2) = w;
    y(i) = 1.0;
  }

  struct Candidate {
    int support;
    int size;
    double residual;
    Eigen::Vector3d beta;
  };
  std::optional<Candidate> best;
  std::vector<Candidate> feasible;
  for (int mask = 1; mask < 8; ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < 3; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    Eigen::MatrixXd A(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) A.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
    const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(y);
    bool ok = sol.allFinite();
    for (Eigen::Index j = 0; j < sol.size(); ++j) ok = ok && sol(j) >= 0;
    if (!ok) continue;
    Eigen::Vector3d beta = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < cols.size(); ++j) beta(cols[j]) = sol(static_cast<Eigen::Index>(j));
    feasible.push_back({mask, static_cast<int>(cols.size()), (A * sol - y).norm(), beta});
  }
  if (feasible.empty()) throw InvalidArgument("fit_latency: no non-negative fit");
  double min_res = kInfinity;
  for (const auto& c : feasible) min_res = std::min(min_res, c.residual);
  const double tie = 1e-9 * std::sqrt(static_cast<double>(n));
  for (const auto& c : feasible) {
    if (c.residual > min_res + tie) continue;
    if (!best || c.size < best->size || (c.size == best->size && c.residual < best->residual)) best = c;
  }

  FitResult r;
  r.coeffs = {best->beta(0) / (scale * scale), best->beta(1) / scale, best->beta(2)};
  r.support = best->support;
  double sq = 0;
  for (const auto& s : samples) {
    const double rel = (r.coeffs(static_cast<double>(s.l)) - s.t) / s.t;
    sq += rel * rel;
    r.max_rel_error = std::max(r.max_rel_error, std::abs(rel));
  }
  r.weighted_rms = std::sqrt(sq / static_cast<double>(samples.size()));
  return r;
}

/// `points` log-spaced integer lengths on [lo, max_len], lo = 128 unless
/// max_len is too small for that, duplicates removed.
inline std::vector<Tokens> profiling_grid(Tokens max_len, int points = 16) {
  if (max_len < 1) throw InvalidArgument("profiling_grid: max_len must be >= 1");
  if (points < 2) throw InvalidArgument("profiling_grid: need >= 2 points");
  const double lo = max_len >= 4 * 128 ? 128.0 : 1.0;
  const double hi = static_cast<double>(max_len);
  std::vector<Tokens> grid;
  for (int i = 0; i < points; ++i) {
    const double x = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
    Tokens l = std::clamp<Tokens>(static_cast<Tokens>(std::llround(x)), 1, max_len);
    if (i == points - 1) l = max_len;
    if (grid.empty() || grid.back() != l) grid.push_back(l);
  }
  return grid;
}

/// Deterministic profiling samples t * (1 + noise * u), u uniform in [-1, 1).
inline std::map<ParallelScheme, std::vector<ProfileSample>> synth_profile(
    const std::map<ParallelScheme, std::pair<LatencyCoeffs, Tokens>>& truth, double noise, std::uint64_t seed,
    int points = 16) {
  if (!(noise >= 0 && noise < 1)) throw InvalidArgument("synth_profile: noise must be in [0, 1)");
  std::map<ParallelScheme, std::vector<ProfileSample>> out;
  for (const auto& [scheme, entry] : truth) {
    const auto& [coeffs, max_l] = entry;
    Rng rng(derive_seed(seed, "profile:" + scheme.to_string()));
    auto& v = out[scheme];
    for (Tokens l : profiling_grid(max_l, points)) {
      const double t = coeffs(static_cast<double>(l));
      const double u = 2.0 * rng.uniform() - 1.0;
      v.push_back({l, noise > 0 ? t * (1.0 + noise * u) : t});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profile.
// ---------------------------------------------------------------------------

/// Coefficients per scheme plus the environment that determines MaxLen, with
/// MaxLen and UtilLen cached per scheme. Immutable after construction.
class CostProfile {
 public:
  CostProfile() = default;

  CostProfile(ModelShape shape, HardwareSpec hw, MemoryConstants mem,
              std::map<ParallelScheme, LatencyCoeffs> coeffs, double util_threshold = 0.85)
      : shape_(shape), hw_(hw), mem_(mem), util_threshold_(util_threshold), coeffs_(std::move(coeffs)) {
    validate_shape(shape_);
    validate_hardware(hw_);
    validate_memory(mem_);
    for (const auto& [scheme, c] : coeffs_) {
      if (!(c.a >= 0 && c.b >= 0 && c.c >= 0))
        throw InvalidArgument("scheme " + scheme.to_string() + ": latency coefficients must be non-negative");
      cache_[scheme] = compute(scheme, c);
    }
  }

  const ModelShape& shape() const { return shape_; }
  const HardwareSpec& hardware() const { return hw_; }
  const MemoryConstants& memory() const { return mem_; }
  double util_threshold() const { return util_threshold_; }
  const std::map<ParallelScheme, LatencyCoeffs>& coefficients() const { return coeffs_; }

  bool has(const ParallelScheme& s) const { return cache_.count(s) > 0; }

  const SchemeCost& cost(const ParallelScheme& s) const {
    const auto it = cache_.find(s);
    if (it == cache_.end()) throw InvalidArgument("unknown scheme " + s.to_string() + " (no coefficients in profile)");
    return it->second;
  }

  Seconds latency(Tokens l, const ParallelScheme& s) const { return cost(s).latency(l); }
  /// 0 when the scheme cannot hold any activations.
  Tokens max_len(const ParallelScheme& s) const { return cost(s).max_len; }
  Tokens util_len(const ParallelScheme& s) const { return cost(s).util_len; }

  /// Schemes with a usable MaxLen, in scheme order.
  std::vector<ParallelScheme> feasible_schemes() const {
    std::vector<ParallelScheme> out;
    for (const auto& [s, c] : cache_)
      if (c.max_len >= 1) out.push_back(s);
    return out;
  }

  /// Recomputes every cached entry; returns the schemes that disagree.
  std::vector<std::string> audit_caches() const {
    std::vector<std::string> bad;
    for (const auto& [s, cached] : cache_) {
      const SchemeCost fresh = compute(s, coeffs_.at(s));
      if (fresh.max_len != cached.max_len || fresh.util_len != cached.util_len) bad.push_back(s.to_string());
    }
    return bad;
  }

  /// Pipelines of `strategy`, in term order.
  std::vector<SchemeCost> pipeline_costs(const Strategy& strategy) const {
    std::vector<SchemeCost> out;
    for (const auto& s : strategy.pipelines()) out.push_back(cost(s));
    return out;
  }

 private:
  SchemeCost compute(const ParallelScheme& s, const LatencyCoeffs& c) const {
    SchemeCost sc{s, c, max_len_or_zero(s, shape_, hw_, mem_), 1};
    if (sc.max_len >= 1) sc.util_len = hydra::util_len(c, sc.max_len, util_threshold_);
    return sc;
  }

  ModelShape shape_;
  HardwareSpec hw_;
  MemoryConstants mem_;
  double util_threshold_ = 0.85;
  std::map<ParallelScheme, LatencyCoeffs> coeffs_;
  std::map<ParallelScheme, SchemeCost> cache_;
};

/// Strategy terms reordered by descending MaxLen (ties: scheme order, largest first).
inline Strategy sort_by_max_len(const Strategy& s, const CostProfile& profile) {
  Strategy out = s;
  std::stable_sort(out.terms.begin(), out.terms.end(), [&](const StrategyTerm& x, const StrategyTerm& y) {
    const Tokens mx = profile.max_len(x.scheme), my = profile.max_len(y.scheme);
    if (mx != my) return mx > my;
    return x.scheme > y.scheme;
  });
  return out;
}

}  // namespace hydra
