// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <utility>

#include "hydra/cost_model.hpp"
#include "hydra/scheme.hpp"

namespace hydra::presets {

/// 7B-class decoder: H = 4096, 32 layers, 32000-entry vocabulary.
inline ModelShape reference_model() { return {4096, 32, 32000}; }

/// 80 GB accelerators with 312 TFLOP/s half precision and a 200 GB/s slowest link.
inline HardwareSpec reference_hardware(int n_gpus = 16) { return {n_gpus, 80e9, 312e12, 200e9, 4e9}; }

inline MemoryConstants reference_memory() { return {34, 192, 0.75, 2}; }

/// Synthetic ground-truth latency of one pipeline stage. Quadratic attention
/// term and linear GEMM term scale with the per-GPU share of work; tp and cp
/// add collective overhead; c is a per-layer launch floor.
inline LatencyCoeffs reference_coeffs(const ParallelScheme& s, const ModelShape& m, const HardwareSpec& hw,
                                      double mfu = 0.55) {
  const double H = static_cast<double>(m.hidden);
  const double layers_ps = static_cast<double>(m.layers) / s.pp;
  const double shard = static_cast<double>(s.tp) * s.cp;
  const double rate = hw.flops * mfu;
  const double a = 6.0 * H * layers_ps / shard / rate * (1.0 + 0.05 * std::log2(static_cast<double>(s.cp)));
  const double b = 72.0 * H * H * layers_ps / shard / rate *
                   (1.0 + 0.15 * std::log2(static_cast<double>(s.tp)) + 0.1 * std::log2(static_cast<double>(s.cp)));
  const double c = layers_ps * 2e-4 * (1.0 + 0.25 * std::log2(shard));
  return {a, b, c};
}

inline std::map<ParallelScheme, LatencyCoeffs> reference_coefficients(const std::vector<ParallelScheme>& schemes,
                                                                       const ModelShape& m, const HardwareSpec& hw) {
  std::map<ParallelScheme, LatencyCoeffs> out;
  for (const auto& s : schemes) out[s] = reference_coeffs(s, m, hw);
  return out;
}

/// Full profile over the default scheme space of an n-GPU cluster.
inline CostProfile reference_profile(int n_gpus = 16) {
  const auto m = reference_model();
  const auto hw = reference_hardware(n_gpus);
  const auto schemes = enumerate_default_schemes(n_gpus, static_cast<int>(m.layers));
  return CostProfile(m, hw, reference_memory(), reference_coefficients(schemes, m, hw));
}

}  // namespace hydra::presets
