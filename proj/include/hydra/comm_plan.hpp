// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hydra/common.hpp"
#include "hydra/scheme.hpp"

namespace hydra {

// Parameter space: `blocks` equal blocks (one per layer, plus an optional
// embedding block), each cut into G mutual slices. Unit u = block * G + slice.

struct UnitRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;  // exclusive

  std::int64_t size() const { return end - begin; }
  bool operator==(const UnitRange&) const = default;
};

struct GpuRole {
  int pipeline = -1;  // -1: the GPU only holds optimizer state
  int stage = 0;
  int tp_rank = 0;
  int cp_rank = 0;
};

enum class LayoutPolicy {
  kAuto,        // strategy-aligned sharding for full homogeneous strategies, contiguous otherwise
  kContiguous,  // rank g owns [gU/N, (g+1)U/N)
};

/// Optimization owner of every unit and the propagation needs of every GPU.
struct PlacementMap {
  int n_gpus = 0;
  int layers = 0;
  bool embedding_block = false;
  std::int64_t granularity = 0;  // G
  std::int64_t units = 0;        // blocks * G
  bool aligned = false;          // strategy-aligned optimization layout in use
  std::vector<int> owner;        // unit -> rank
  std::vector<GpuRole> roles;    // rank -> propagation role
  std::vector<std::vector<UnitRange>> needed;  // rank -> sorted disjoint ranges

  int blocks() const { return layers + (embedding_block ? 1 : 0); }
};

struct Primitive {
  enum class Kind { kSend, kReceive, kLocalMove };
  Kind kind = Kind::kLocalMove;
  int src = 0;
  int dst = 0;
  UnitRange range;

  bool operator==(const Primitive&) const = default;
};

inline const char* kind_name(Primitive::Kind k) {
  switch (k) {
    case Primitive::Kind::kSend: return "send";
    case Primitive::Kind::kReceive: return "receive";
    case Primitive::Kind::kLocalMove: return "local_move";
  }
  return "?";
}

struct ReduceScatterGroup {
  std::vector<int> ranks;                 // ascending
  std::vector<std::vector<UnitRange>> shards;  // shards[i]: units reduced onto ranks[i]
  std::int64_t units = 0;                 // units held by every member
};

struct GpuVolume {
  std::int64_t sent = 0;      // network units
  std::int64_t received = 0;  // network units
  std::int64_t local = 0;     // units moved without the network
  std::int64_t rs_sent = 0;   // push only: ring reduce-scatter units
  std::int64_t rs_received = 0;
};

enum class Direction { kPull, kPush };
enum class Collective { kAllGather, kReduceScatterOnly, kGeneral };

inline const char* collective_name(Collective c) {
  switch (c) {
    case Collective::kAllGather: return "all_gather";
    case Collective::kReduceScatterOnly: return "reduce_scatter_only";
    case Collective::kGeneral: return "general";
  }
  return "?";
}

struct CommPlan {
  Direction direction = Direction::kPull;
  std::string strategy;
  int n_gpus = 0;
  std::int64_t granularity = 0;
  std::int64_t units = 0;
  std::vector<Primitive> primitives;  // sorted by (dst, begin, kind)
  std::vector<ReduceScatterGroup> reduce_scatter_groups;
  std::vector<GpuVolume> per_gpu;
  PlacementMap placement;
};

inline std::int64_t lcm64(std::int64_t a, std::int64_t b) { return a / std::gcd(a, b) * b; }

/// Pull granularity: LCM(N, TP_max), widened to every tp degree when they do not divide TP_max.
inline std::int64_t pull_granularity(const Strategy& s, int n_gpus) {
  std::int64_t g = lcm64(n_gpus, s.tp_max());
  for (const auto& t : s.terms) g = lcm64(g, t.scheme.tp);
  return g;
}

/// Push granularity: LCM(N, D_cp * TP_max) with D_cp = sum_i d_i * CP(P_i).
inline std::int64_t push_granularity(const Strategy& s, int n_gpus) {
  std::int64_t g = lcm64(n_gpus, static_cast<std::int64_t>(s.cp_weighted_count()) * s.tp_max());
  for (const auto& t : s.terms) g = lcm64(g, t.scheme.tp);
  return g;
}

namespace detail {

inline void append_range(std::vector<UnitRange>& v, std::int64_t b, std::int64_t e) {
  if (b >= e) return;
  if (!v.empty() && v.back().end == b) v.back().end = e;
  else v.push_back({b, e});
}

// Units of region (stage s of a pp-stage pipeline, tp rank r), in flat order.
inline std::vector<UnitRange> region_ranges(const ParallelScheme& sc, int stage, int tp_rank, int layers,
                                            bool embedding, std::int64_t G) {
  std::vector<UnitRange> out;
  const int per = layers / sc.pp;
  const std::int64_t w = G / sc.tp;
  for (int b = stage * per; b < (stage + 1) * per; ++b)
    append_range(out, b * G + tp_rank * w, b * G + (tp_rank + 1) * w);
  if (embedding && stage == 0) append_range(out, static_cast<std::int64_t>(layers) * G + tp_rank * w,
                                             static_cast<std::int64_t>(layers) * G + (tp_rank + 1) * w);
  return out;
}

}  // namespace detail

/// GPUs numbered pipeline-major (strategy order), then stage, then tp rank, then cp rank.
inline PlacementMap build_placement(const Strategy& strategy, int n_gpus, int layers, std::int64_t granularity,
                                    LayoutPolicy policy = LayoutPolicy::kAuto, bool embedding_block = false) {
  const auto report = validate_strategy(strategy, n_gpus, layers);
  if (!report.ok()) throw InvalidArgument("build_placement: " + report.to_string());
  PlacementMap pm;
  pm.n_gpus = n_gpus;
  pm.layers = layers;
  pm.embedding_block = embedding_block;
  pm.granularity = granularity;
  pm.units = static_cast<std::int64_t>(pm.blocks()) * granularity;
  for (const auto& t : strategy.terms)
    if (granularity % t.scheme.tp != 0) throw InvalidArgument("granularity must be divisible by every tp degree");
  if (granularity % n_gpus != 0) throw InvalidArgument("granularity must be divisible by N");
  pm.roles.assign(static_cast<std::size_t>(n_gpus), {});
  pm.needed.assign(static_cast<std::size_t>(n_gpus), {});

  int rank = 0, pipeline = 0;
  for (const auto& t : strategy.terms) {
    for (int c = 0; c < t.count; ++c, ++pipeline) {
      for (int s = 0; s < t.scheme.pp; ++s)
        for (int r = 0; r < t.scheme.tp; ++r)
          for (int k = 0; k < t.scheme.cp; ++k, ++rank) {
            pm.roles[static_cast<std::size_t>(rank)] = {pipeline, s, r, k};
            pm.needed[static_cast<std::size_t>(rank)] =
                detail::region_ranges(t.scheme, s, r, layers, embedding_block, granularity);
          }
    }
  }

  pm.owner.assign(static_cast<std::size_t>(pm.units), -1);
  pm.aligned = policy == LayoutPolicy::kAuto && strategy.homogeneous() && strategy.total_gpus() == n_gpus &&
               (!embedding_block || strategy.terms.front().scheme.pp == 1);
  if (pm.aligned) {
    // Each (stage, tp) region is split in flat order into D_cp equal chunks;
    // chunk p * cp + c belongs to rank (p, s, r, c).
    const ParallelScheme sc = strategy.terms.front().scheme;
    const int dcp = strategy.pipeline_count() * sc.cp;
    for (int g = 0; g < n_gpus; ++g) {
      const auto& role = pm.roles[static_cast<std::size_t>(g)];
      const auto region = detail::region_ranges(sc, role.stage, role.tp_rank, layers, embedding_block, granularity);
      std::int64_t total = 0;
      for (const auto& r : region) total += r.size();
      if (total % dcp != 0) throw InvalidArgument("aligned layout: region not divisible by D_cp");
      const std::int64_t chunk = total / dcp;
      const std::int64_t idx = static_cast<std::int64_t>(role.pipeline) * sc.cp + role.cp_rank;
      std::int64_t pos = 0;
      for (const auto& r : region)
        for (std::int64_t u = r.begin; u < r.end; ++u, ++pos)
          if (pos / chunk == idx) pm.owner[static_cast<std::size_t>(u)] = g;
    }
  } else {
    const std::int64_t share = pm.units / n_gpus;
    for (std::int64_t u = 0; u < pm.units; ++u) pm.owner[static_cast<std::size_t>(u)] = static_cast<int>(u / share);
  }
  for (std::int64_t u = 0; u < pm.units; ++u)
    if (pm.owner[static_cast<std::size_t>(u)] < 0) throw Error("build_placement: unowned unit " + std::to_string(u));
  return pm;
}

namespace detail {

inline void sort_primitives(std::vector<Primitive>& p) {
  std::sort(p.begin(), p.end(), [](const Primitive& a, const Primitive& b) {
    if (a.dst != b.dst) return a.dst < b.dst;
    if (a.range.begin != b.range.begin) return a.range.begin < b.range.begin;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.src < b.src;
  });
}

// Emits primitives moving `units` of `dst`'s range from their holders `from[u]`.
inline void route(std::vector<Primitive>& prims, std::vector<GpuVolume>& vol, int dst, const UnitRange& range,
                  const std::vector<int>& from) {
  std::int64_t u = range.begin;
  while (u < range.end) {
    const int src = from[static_cast<std::size_t>(u)];
    std::int64_t e = u + 1;
    while (e < range.end && from[static_cast<std::size_t>(e)] == src) ++e;
    const UnitRange r{u, e};
    if (src == dst) {
      prims.push_back({Primitive::Kind::kLocalMove, src, dst, r});
      vol[static_cast<std::size_t>(dst)].local += r.size();
    } else {
      prims.push_back({Primitive::Kind::kSend, src, dst, r});
      prims.push_back({Primitive::Kind::kReceive, src, dst, r});
      vol[static_cast<std::size_t>(src)].sent += r.size();
      vol[static_cast<std::size_t>(dst)].received += r.size();
    }
    u = e;
  }
}

}  // namespace detail

/// Parameter retrieval from optimizer owners into the propagation layout.
inline CommPlan pull_plan(const Strategy& strategy, int n_gpus, int layers, LayoutPolicy policy = LayoutPolicy::kAuto,
                          bool embedding_block = false) {
  CommPlan plan;
  plan.direction = Direction::kPull;
  plan.strategy = strategy.to_string();
  plan.n_gpus = n_gpus;
  plan.granularity = pull_granularity(strategy, n_gpus);
  plan.placement = build_placement(strategy, n_gpus, layers, plan.granularity, policy, embedding_block);
  plan.units = plan.placement.units;
  plan.per_gpu.assign(static_cast<std::size_t>(n_gpus), {});
  for (int g = 0; g < n_gpus; ++g)
    for (const auto& r : plan.placement.needed[static_cast<std::size_t>(g)])
      detail::route(plan.primitives, plan.per_gpu, g, r, plan.placement.owner);
  detail::sort_primitives(plan.primitives);
  return plan;
}

/// Gradient return: reduce-scatter over the GPUs holding each unit, then
/// routing from each reducer to the unit's optimizer owner.
inline CommPlan push_plan(const Strategy& strategy, int n_gpus, int layers, LayoutPolicy policy = LayoutPolicy::kAuto,
                          bool embedding_block = false) {
  CommPlan plan;
  plan.direction = Direction::kPush;
  plan.strategy = strategy.to_string();
  plan.n_gpus = n_gpus;
  plan.granularity = push_granularity(strategy, n_gpus);
  plan.placement = build_placement(strategy, n_gpus, layers, plan.granularity, policy, embedding_block);
  plan.units = plan.placement.units;
  plan.per_gpu.assign(static_cast<std::size_t>(n_gpus), {});
  const auto& pm = plan.placement;

  // Holder set of every unit.
  std::vector<std::vector<int>> holders(static_cast<std::size_t>(pm.units));
  for (int g = 0; g < n_gpus; ++g)
    for (const auto& r : pm.needed[static_cast<std::size_t>(g)])
      for (std::int64_t u = r.begin; u < r.end; ++u) holders[static_cast<std::size_t>(u)].push_back(g);

  // Group units by holder set (flat order inside each group), split each
  // group into |H| contiguous balanced chunks, chunk i reduced onto H[i].
  std::map<std::vector<int>, std::vector<std::int64_t>> by_set;
  for (std::int64_t u = 0; u < pm.units; ++u)
    if (!holders[static_cast<std::size_t>(u)].empty()) by_set[holders[static_cast<std::size_t>(u)]].push_back(u);
  std::vector<int> reducer(static_cast<std::size_t>(pm.units), -1);
  for (const auto& [set, us] : by_set) {
    ReduceScatterGroup grp;
    grp.ranks = set;
    grp.units = static_cast<std::int64_t>(us.size());
    grp.shards.assign(set.size(), {});
    const auto h = static_cast<std::int64_t>(set.size());
    const auto n = static_cast<std::int64_t>(us.size());
    for (std::int64_t i = 0; i < h; ++i) {
      const std::int64_t b = i * n / h, e = (i + 1) * n / h;
      for (std::int64_t k = b; k < e; ++k) {
        detail::append_range(grp.shards[static_cast<std::size_t>(i)], us[static_cast<std::size_t>(k)],
                             us[static_cast<std::size_t>(k)] + 1);
        reducer[static_cast<std::size_t>(us[static_cast<std::size_t>(k)])] = set[static_cast<std::size_t>(i)];
      }
      // Ring reduce-scatter: each member sends and receives (h - 1) chunks of size ~n/h.
      if (h > 1) {
        auto& v = plan.per_gpu[static_cast<std::size_t>(set[static_cast<std::size_t>(i)])];
        v.rs_sent += n - (e - b);
        v.rs_received += n - (e - b);
      }
    }
    plan.reduce_scatter_groups.push_back(std::move(grp));
  }

  // LNK: reducer -> owner, delivered per owner in flat order.
  for (int g = 0; g < n_gpus; ++g) {
    std::int64_t u = 0;
    while (u < pm.units) {
      if (pm.owner[static_cast<std::size_t>(u)] != g) {
        ++u;
        continue;
      }
      std::int64_t e = u;
      while (e < pm.units && pm.owner[static_cast<std::size_t>(e)] == g) ++e;
      detail::route(plan.primitives, plan.per_gpu, g, {u, e}, reducer);
      u = e;
    }
  }
  detail::sort_primitives(plan.primitives);
  return plan;
}

/// Conservation, pairing and granularity audit; empty when every check passes.
inline std::vector<std::string> audit_comm_plan(const CommPlan& plan, const Strategy& strategy) {
  std::vector<std::string> bad;
  const auto& pm = plan.placement;
  const std::int64_t want_g = plan.direction == Direction::kPull ? pull_granularity(strategy, plan.n_gpus)
                                                                  : push_granularity(strategy, plan.n_gpus);
  if (plan.granularity != want_g)
    bad.push_back("granularity " + std::to_string(plan.granularity) + " != " + std::to_string(want_g));

  // Optimization layout partitions [0, U).
  std::vector<std::int64_t> owned(static_cast<std::size_t>(plan.n_gpus), 0);
  for (int o : pm.owner) {
    if (o < 0 || o >= plan.n_gpus) {
      bad.push_back("unit with invalid owner");
      return bad;
    }
    ++owned[static_cast<std::size_t>(o)];
  }
  for (int g = 0; g < plan.n_gpus; ++g)
    if (owned[static_cast<std::size_t>(g)] * plan.n_gpus != plan.units)
      bad.push_back("rank " + std::to_string(g) + " owns " + std::to_string(owned[static_cast<std::size_t>(g)]) +
                    " units, expected U/N");

  // Delivery: receive + local_move per destination unit.
  std::map<std::pair<int, std::int64_t>, int> delivered;
  std::multiset<std::tuple<int, int, std::int64_t, std::int64_t>> sends, recvs;
  for (const auto& p : plan.primitives) {
    if (p.range.begin >= p.range.end || p.range.begin < 0 || p.range.end > plan.units) {
      bad.push_back("primitive with invalid range");
      continue;
    }
    if (p.kind == Primitive::Kind::kSend) {
      sends.insert({p.src, p.dst, p.range.begin, p.range.end});
      continue;
    }
    if (p.kind == Primitive::Kind::kReceive) recvs.insert({p.src, p.dst, p.range.begin, p.range.end});
    if (p.kind == Primitive::Kind::kLocalMove && p.src != p.dst) bad.push_back("local_move across GPUs");
    for (std::int64_t u = p.range.begin; u < p.range.end; ++u) ++delivered[{p.dst, u}];
  }
  if (sends != recvs) bad.push_back("sends and receives do not pair bijectively");

  if (plan.direction == Direction::kPull) {
    std::int64_t need_total = 0;
    for (int g = 0; g < plan.n_gpus; ++g)
      for (const auto& r : pm.needed[static_cast<std::size_t>(g)])
        for (std::int64_t u = r.begin; u < r.end; ++u) {
          ++need_total;
          const auto it = delivered.find({g, u});
          if (it == delivered.end() || it->second != 1) {
            bad.push_back("rank " + std::to_string(g) + " unit " + std::to_string(u) + " delivered " +
                          std::to_string(it == delivered.end() ? 0 : it->second) + " times");
            return bad;
          }
        }
    if (static_cast<std::int64_t>(delivered.size()) != need_total) bad.push_back("units delivered that were not needed");
    for (const auto& p : plan.primitives)
      if (p.kind != Primitive::Kind::kReceive)
        for (std::int64_t u = p.range.begin; u < p.range.end; ++u)
          if (pm.owner[static_cast<std::size_t>(u)] != p.src) {
            bad.push_back("pull primitive sourced from a non-owner");
            return bad;
          }
  } else {
    // Every held unit reduced exactly once; every owner receives each of its units once.
    std::vector<int> reduced(static_cast<std::size_t>(plan.units), 0);
    std::vector<int> reducer(static_cast<std::size_t>(plan.units), -1);
    for (const auto& grp : plan.reduce_scatter_groups)
      for (std::size_t i = 0; i < grp.ranks.size(); ++i)
        for (const auto& r : grp.shards[i])
          for (std::int64_t u = r.begin; u < r.end; ++u) {
            ++reduced[static_cast<std::size_t>(u)];
            reducer[static_cast<std::size_t>(u)] = grp.ranks[i];
          }
    std::vector<int> held(static_cast<std::size_t>(plan.units), 0);
    for (int g = 0; g < plan.n_gpus; ++g)
      for (const auto& r : pm.needed[static_cast<std::size_t>(g)])
        for (std::int64_t u = r.begin; u < r.end; ++u) held[static_cast<std::size_t>(u)] = 1;
    for (std::int64_t u = 0; u < plan.units; ++u) {
      if (reduced[static_cast<std::size_t>(u)] != held[static_cast<std::size_t>(u)]) {
        bad.push_back("unit " + std::to_string(u) + " reduced " + std::to_string(reduced[static_cast<std::size_t>(u)]) +
                      " times");
        return bad;
      }
      if (!held[static_cast<std::size_t>(u)]) continue;
      const int o = pm.owner[static_cast<std::size_t>(u)];
      const auto it = delivered.find({o, u});
      if (it == delivered.end() || it->second != 1) {
        bad.push_back("owner " + std::to_string(o) + " unit " + std::to_string(u) + " not delivered exactly once");
        return bad;
      }
    }
    for (const auto& p : plan.primitives)
      if (p.kind != Primitive::Kind::kReceive)
        for (std::int64_t u = p.range.begin; u < p.range.end; ++u)
          if (reducer[static_cast<std::size_t>(u)] != p.src || pm.owner[static_cast<std::size_t>(u)] != p.dst) {
            bad.push_back("push primitive does not route reducer to owner");
            return bad;
          }
  }
  return bad;
}

/// Pattern classification of a plan's primitive structure.
inline Collective reduce_to_collectives(const CommPlan& plan) {
  const auto& pm = plan.placement;
  if (plan.direction == Direction::kPush) {
    for (const auto& p : plan.primitives)
      if (p.kind != Primitive::Kind::kLocalMove) return Collective::kGeneral;
    return Collective::kReduceScatterOnly;
  }
  // Replica groups: GPUs with identical needed sets.
  std::map<std::vector<std::pair<std::int64_t, std::int64_t>>, std::vector<int>> groups;
  for (int g = 0; g < plan.n_gpus; ++g) {
    std::vector<std::pair<std::int64_t, std::int64_t>> key;
    for (const auto& r : pm.needed[static_cast<std::size_t>(g)]) key.push_back({r.begin, r.end});
    if (key.empty()) return Collective::kGeneral;  // an idle GPU still owns state
    groups[key].push_back(g);
  }
  std::vector<int> group_of(static_cast<std::size_t>(plan.units), -1);
  int gid = 0;
  for (const auto& [key, members] : groups) {
    std::map<int, std::int64_t> share;
    std::int64_t total = 0;
    for (const auto& [b, e] : key)
      for (std::int64_t u = b; u < e; ++u) {
        if (group_of[static_cast<std::size_t>(u)] >= 0) return Collective::kGeneral;  // overlapping needs
        group_of[static_cast<std::size_t>(u)] = gid;
        ++share[pm.owner[static_cast<std::size_t>(u)]];
        ++total;
      }
    if (share.size() != members.size()) return Collective::kGeneral;
    for (int m : members) {
      const auto it = share.find(m);
      if (it == share.end() || it->second * static_cast<std::int64_t>(members.size()) != total)
        return Collective::kGeneral;
    }
    ++gid;
  }
  return Collective::kAllGather;
}

/// Demand volume: network plus local units, as counted when every needed
/// slice is charged whether or not it is local.
inline std::int64_t demand_sent(const CommPlan& plan, int g) {
  std::int64_t n = 0;
  for (const auto& p : plan.primitives)
    if ((p.kind == Primitive::Kind::kSend || p.kind == Primitive::Kind::kLocalMove) && p.src == g) n += p.range.size();
  return n;
}

inline std::int64_t demand_received(const CommPlan& plan, int g) {
  std::int64_t n = 0;
  for (const auto& p : plan.primitives)
    if ((p.kind == Primitive::Kind::kReceive || p.kind == Primitive::Kind::kLocalMove) && p.dst == g) n += p.range.size();
  return n;
}

struct ByteVolume {
  double sent = 0;
  double received = 0;
  double local = 0;
  double demand_sent = 0;
  double demand_received = 0;
  double rs_sent = 0;
  double rs_received = 0;
};

/// Unit tallies converted to bytes with W = param_bytes spread over all units.
inline std::vector<ByteVolume> volumes(const CommPlan& plan, double param_bytes) {
  const double per_unit = param_bytes / static_cast<double>(plan.units);
  std::vector<ByteVolume> out(static_cast<std::size_t>(plan.n_gpus));
  for (int g = 0; g < plan.n_gpus; ++g) {
    const auto& v = plan.per_gpu[static_cast<std::size_t>(g)];
    auto& o = out[static_cast<std::size_t>(g)];
    o.sent = static_cast<double>(v.sent) * per_unit;
    o.received = static_cast<double>(v.received) * per_unit;
    o.local = static_cast<double>(v.local) * per_unit;
    o.demand_sent = static_cast<double>(demand_sent(plan, g)) * per_unit;
    o.demand_received = static_cast<double>(demand_received(plan, g)) * per_unit;
    o.rs_sent = static_cast<double>(v.rs_sent) * per_unit;
    o.rs_received = static_cast<double>(v.rs_received) * per_unit;
  }
  return out;
}

/// Graphviz rendering: one edge per (src, dst) pair with its unit count.
inline std::string to_dot(const CommPlan& plan) {
  std::map<std::pair<int, int>, std::int64_t> edges;
  for (const auto& p : plan.primitives)
    if (p.kind != Primitive::Kind::kReceive) edges[{p.src, p.dst}] += p.range.size();
  std::ostringstream os;
  os << "digraph " << (plan.direction == Direction::kPull ? "pull" : "push") << " {\n";
  os << "  label=\"" << plan.strategy << " G=" << plan.granularity << "\";\n";
  for (int g = 0; g < plan.n_gpus; ++g) {
    const auto& r = plan.placement.roles[static_cast<std::size_t>(g)];
    os << "  gpu" << g << " [label=\"" << g;
    if (r.pipeline >= 0) os << "\\np" << r.pipeline << " s" << r.stage << " t" << r.tp_rank << " c" << r.cp_rank;
    os << "\"];\n";
  }
  for (const auto& [e, n] : edges) {
    os << "  gpu" << e.first << " -> gpu" << e.second << " [label=\"" << n << "\"";
    if (e.first == e.second) os << ", style=dashed";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace hydra
