// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hydra/comm_plan.hpp"
#include "hydra/common.hpp"
#include "hydra/cost_model.hpp"
#include "hydra/planner.hpp"
#include "hydra/proposal.hpp"
#include "hydra/simulator.hpp"
#include "json.hpp"

namespace hydra::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json header(const std::string& kind) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  return j;
}

inline void expect_kind(const Json& j, const std::string& kind) {
  if (!j.is_object() || !j.contains("schema_version") || !j.contains("kind"))
    throw ParseError("not a versioned artifact (missing schema_version/kind)");
  if (j["schema_version"].get<int>() != kSchemaVersion)
    throw ParseError("unsupported schema_version " + j["schema_version"].dump());
  if (j["kind"].get<std::string>() != kind)
    throw ParseError("expected a '" + kind + "' artifact, got '" + j["kind"].get<std::string>() + "'");
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// Wraps a parse of a json subtree so type errors surface as ParseError.
template <typename Fn>
auto parsing(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string command;
  std::string dataset;
  std::string profile;
  std::string candidates;
  std::string output;
  Tokens token_budget = 100000;
  Tokens context_length = 32768;
  int iterations = 100;
  std::uint64_t seed = 0;
  int n_gpus = 16;
  int trials = 100;
  std::size_t exact_dispatch_cutoff = 10;
  std::size_t exact_pack_cutover = 12;
  std::string overlap = "full";
  Json extra = Json::object();  // command-specific settings
};

inline Json to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["paths"] = {{"dataset", c.dataset}, {"profile", c.profile}, {"candidates", c.candidates}, {"output", c.output}};
  j["workload"] = {{"token_budget", c.token_budget},
                   {"context_length", c.context_length},
                   {"iterations", c.iterations},
                   {"seed", c.seed}};
  j["planner"] = {{"n_gpus", c.n_gpus},
                  {"trials", c.trials},
                  {"exact_dispatch_cutoff", c.exact_dispatch_cutoff},
                  {"exact_pack_cutover", c.exact_pack_cutover},
                  {"overlap", c.overlap}};
  j["settings"] = c.extra;
  return j;
}

// ---------------------------------------------------------------------------
// Profile.
// ---------------------------------------------------------------------------

inline Json shape_json(const ModelShape& m) {
  return {{"hidden", m.hidden}, {"layers", m.layers}, {"vocab", m.vocab}};
}
inline Json hardware_json(const HardwareSpec& h) {
  return {{"n_gpus", h.n_gpus},
          {"gpu_memory", h.gpu_memory},
          {"flops", h.flops},
          {"bandwidth", h.bandwidth},
          {"safety_margin", h.safety_margin}};
}
inline Json memory_json(const MemoryConstants& k) {
  return {{"act_const", k.act_const}, {"state_const", k.state_const}, {"alpha", k.alpha}, {"embed_factor", k.embed_factor}};
}

inline ModelShape shape_from(const Json& j) {
  return parsing("model", [&] {
    return ModelShape{j.at("hidden").get<std::int64_t>(), j.at("layers").get<std::int64_t>(),
                      j.at("vocab").get<std::int64_t>()};
  });
}
inline HardwareSpec hardware_from(const Json& j) {
  return parsing("hardware", [&] {
    return HardwareSpec{j.at("n_gpus").get<int>(), j.at("gpu_memory").get<double>(), j.at("flops").get<double>(),
                        j.at("bandwidth").get<double>(), j.at("safety_margin").get<double>()};
  });
}
inline MemoryConstants memory_from(const Json& j) {
  return parsing("memory", [&] {
    return MemoryConstants{j.at("act_const").get<double>(), j.at("state_const").get<double>(),
                           j.at("alpha").get<double>(), j.at("embed_factor").get<double>()};
  });
}

inline Json to_json(const CostProfile& p) {
  Json j = header("profile");
  j["model"] = shape_json(p.shape());
  j["hardware"] = hardware_json(p.hardware());
  j["memory"] = memory_json(p.memory());
  j["util_threshold"] = p.util_threshold();
  Json schemes = Json::object();
  for (const auto& [s, c] : p.coefficients()) {
    const auto& sc = p.cost(s);
    schemes[s.to_string()] = {{"a", c.a}, {"b", c.b}, {"c", c.c}, {"max_len", sc.max_len}, {"util_len", sc.util_len}};
  }
  j["schemes"] = schemes;
  return j;
}

/// Loads a profile and checks any cached max_len/util_len against recomputation.
inline CostProfile profile_from(const Json& j) {
  expect_kind(j, "profile");
  std::map<ParallelScheme, LatencyCoeffs> coeffs;
  const auto& schemes = parsing("profile", [&] { return j.at("schemes"); });
  for (const auto& [name, e] : schemes.items()) {
    coeffs[parse_scheme(name)] = parsing("scheme " + name, [&] {
      return LatencyCoeffs{e.at("a").get<double>(), e.at("b").get<double>(), e.at("c").get<double>()};
    });
  }
  CostProfile p(shape_from(j.at("model")), hardware_from(j.at("hardware")), memory_from(j.at("memory")), coeffs,
                j.value("util_threshold", 0.85));
  for (const auto& [name, e] : schemes.items()) {
    const auto s = parse_scheme(name);
    if (e.contains("max_len") && e["max_len"].get<Tokens>() != p.max_len(s))
      throw AuditError("profile cache: max_len of " + name + " is " + e["max_len"].dump() + ", recomputed " +
                       std::to_string(p.max_len(s)));
    if (e.contains("util_len") && e["util_len"].get<Tokens>() != p.util_len(s))
      throw AuditError("profile cache: util_len of " + name + " is " + e["util_len"].dump() + ", recomputed " +
                       std::to_string(p.util_len(s)));
  }
  return p;
}

inline CostProfile load_profile(const std::filesystem::path& path) { return profile_from(read_json(path)); }

// ---------------------------------------------------------------------------
// Candidates.
// ---------------------------------------------------------------------------

inline Json to_json(const CandidateSet& cs, int n_gpus, Tokens l_max, const DpSteps& steps) {
  Json j = header("candidates");
  j["n_gpus"] = n_gpus;
  j["l_max"] = l_max;
  j["steps"] = {{"n_step", steps.n_step}, {"d_step", steps.d_step}, {"l_step", steps.l_step}};
  Json arr = Json::array();
  for (const auto& c : cs.candidates) {
    Json f = Json::array();
    for (const auto& t : c.fractional) f.push_back({{"scheme", t.scheme.to_string()}, {"count", t.count}});
    Json e;
    e["strategy"] = c.strategy.to_string();
    e["gpus"] = c.strategy.total_gpus();
    e["safety"] = c.safety;
    e["provenance_l"] = c.provenance_l;
    e["fractional"] = f;
    e["dp_score"] = c.dp_score;
    e["relaxed_score"] = c.relaxed_score;
    arr.push_back(e);
  }
  j["candidates"] = arr;
  return j;
}

struct LoadedCandidates {
  std::vector<Strategy> strategies;
  std::vector<bool> safety;
  int n_gpus = 0;
};

/// Re-validates every strategy against N and the profile on load.
inline LoadedCandidates candidates_from(const Json& j, const CostProfile& profile) {
  expect_kind(j, "candidates");
  LoadedCandidates out;
  out.n_gpus = parsing("candidates", [&] { return j.at("n_gpus").get<int>(); });
  if (out.n_gpus != profile.hardware().n_gpus)
    throw AuditError("candidate file is for N=" + std::to_string(out.n_gpus) + ", profile has N=" +
                     std::to_string(profile.hardware().n_gpus));
  for (const auto& e : parsing("candidates", [&] { return j.at("candidates"); })) {
    const auto text = parsing("candidate", [&] { return e.at("strategy").get<std::string>(); });
    const auto s = parse_strategy(text);
    const auto rep = validate_strategy(s, out.n_gpus, static_cast<int>(profile.shape().layers));
    if (!rep.ok()) throw AuditError("candidate " + text + ": " + rep.to_string());
    for (const auto& t : s.terms) (void)profile.cost(t.scheme);
    out.strategies.push_back(s);
    out.safety.push_back(e.value("safety", false));
  }
  if (out.strategies.empty()) throw ParseError("candidate file lists no strategies");
  return out;
}

// ---------------------------------------------------------------------------
// Plans.
// ---------------------------------------------------------------------------

inline Json to_json(const StrategyPlan& p) {
  Json j;
  j["strategy"] = p.strategy.to_string();
  j["estimated_latency"] = p.estimated_latency;
  j["dispatch"] = {{"method", p.dispatch_method},
                   {"optimal", p.dispatch.optimal},
                   {"objective", p.dispatch.objective},
                   {"assignment", p.dispatch.assignment},
                   {"per_pipeline_bound", p.dispatch.per_pipeline_bound}};
  const auto schemes = p.strategy.pipelines();
  Json pipes = Json::array();
  for (std::size_t k = 0; k < p.packings.size(); ++k) {
    const auto& pk = p.packings[k];
    Json mbs = Json::array();
    for (int m = 0; m < pk.v; ++m) {
      std::vector<int> seqs;
      for (std::size_t i = 0; i < pk.assignment.size(); ++i)
        if (pk.assignment[i] == m) seqs.push_back(p.members[k][i]);
      mbs.push_back({{"sequences", seqs},
                     {"tokens", pk.per_microbatch[static_cast<std::size_t>(m)].tokens},
                     {"time", pk.per_microbatch[static_cast<std::size_t>(m)].time}});
    }
    pipes.push_back({{"scheme", schemes[k].to_string()},
                     {"members", p.members[k]},
                     {"tokens", p.pipeline_tokens[k]},
                     {"v", pk.v},
                     {"objective", pk.objective},
                     {"optimal", pk.optimal},
                     {"empty", static_cast<bool>(p.empty_pipelines[k])},
                     {"microbatches", mbs}});
  }
  j["pipelines"] = pipes;
  return j;
}

/// Rebuilds a StrategyPlan from its JSON form and audits it against the profile.
inline StrategyPlan plan_from(const Json& j, const std::vector<Tokens>& lengths, const CostProfile& profile) {
  return parsing("plan", [&] {
    StrategyPlan p;
    p.strategy = parse_strategy(j.at("strategy").get<std::string>());
    p.estimated_latency = j.at("estimated_latency").get<double>();
    const auto& d = j.at("dispatch");
    p.dispatch_method = d.at("method").get<std::string>();
    p.dispatch.optimal = d.at("optimal").get<bool>();
    p.dispatch.objective = d.at("objective").get<double>();
    p.dispatch.assignment = d.at("assignment").get<std::vector<int>>();
    p.dispatch.per_pipeline_bound = d.at("per_pipeline_bound").get<std::vector<double>>();
    const auto pipes = profile.pipeline_costs(p.strategy);
    for (const auto& e : j.at("pipelines")) {
      const std::size_t k = p.members.size();
      if (k >= pipes.size()) throw ParseError("plan lists more pipelines than its strategy");
      p.members.push_back(e.at("members").get<std::vector<int>>());
      std::vector<int> local(p.members[k].size(), -1);
      std::vector<Tokens> sub;
      for (int i : p.members[k]) {
        if (i < 0 || static_cast<std::size_t>(i) >= lengths.size()) throw ParseError("plan member out of range");
        sub.push_back(lengths[static_cast<std::size_t>(i)]);
      }
      int m = 0;
      for (const auto& mb : e.at("microbatches")) {
        for (int i : mb.at("sequences").get<std::vector<int>>()) {
          const auto it = std::find(p.members[k].begin(), p.members[k].end(), i);
          if (it == p.members[k].end()) throw ParseError("micro-batch lists a sequence outside its pipeline");
          local[static_cast<std::size_t>(it - p.members[k].begin())] = m;
        }
        ++m;
      }
      PackingPlan pk;
      pk.assignment = local;
      pk.v = m;
      pk.optimal = e.at("optimal").get<bool>();
      pk.objective = e.at("objective").get<double>();
      for (const auto& mb : e.at("microbatches"))
        pk.per_microbatch.push_back({mb.at("tokens").get<Tokens>(), mb.at("time").get<double>()});
      p.packings.push_back(std::move(pk));
      p.pipeline_tokens.push_back(e.at("tokens").get<Tokens>());
      p.microbatch_counts.push_back(m);
      p.empty_pipelines.push_back(e.at("empty").get<bool>());
    }
    const auto bad = audit_plan(p, lengths, profile);
    if (!bad.empty()) throw AuditError("plan audit failed: " + bad.front());
    return p;
  });
}

// ---------------------------------------------------------------------------
// Communication plans and simulation reports.
// ---------------------------------------------------------------------------

inline Json to_json(const CommPlan& c, double param_bytes, const Strategy& strategy) {
  Json j = header("comm_plan");
  j["direction"] = c.direction == Direction::kPull ? "pull" : "push";
  j["strategy"] = c.strategy;
  j["n_gpus"] = c.n_gpus;
  j["granularity"] = c.granularity;
  j["units"] = c.units;
  j["aligned_layout"] = c.placement.aligned;
  j["classification"] = collective_name(reduce_to_collectives(c));
  const auto bad = audit_comm_plan(c, strategy);
  j["audit"] = bad;
  Json prims = Json::array();
  for (const auto& p : c.primitives)
    prims.push_back({{"op", kind_name(p.kind)}, {"src", p.src}, {"dst", p.dst}, {"begin", p.range.begin},
                     {"end", p.range.end}});
  j["primitives"] = prims;
  Json groups = Json::array();
  for (const auto& g : c.reduce_scatter_groups) {
    Json shards = Json::array();
    for (const auto& s : g.shards) {
      Json rs = Json::array();
      for (const auto& r : s) rs.push_back({r.begin, r.end});
      shards.push_back(rs);
    }
    groups.push_back({{"ranks", g.ranks}, {"units", g.units}, {"shards", shards}});
  }
  j["reduce_scatter_groups"] = groups;
  Json vols = Json::array();
  const auto bytes = volumes(c, param_bytes);
  for (int g = 0; g < c.n_gpus; ++g) {
    const auto& u = c.per_gpu[static_cast<std::size_t>(g)];
    const auto& b = bytes[static_cast<std::size_t>(g)];
    vols.push_back({{"rank", g},
                    {"sent_units", u.sent},
                    {"received_units", u.received},
                    {"local_units", u.local},
                    {"sent_bytes", b.sent},
                    {"received_bytes", b.received},
                    {"demand_sent_bytes", b.demand_sent},
                    {"demand_received_bytes", b.demand_received},
                    {"reduce_scatter_sent_bytes", b.rs_sent}});
  }
  j["per_gpu_volume"] = vols;
  return j;
}

inline Json to_json(const SimReport& r, bool with_timeline = false) {
  Json j;
  j["strategy"] = r.strategy;
  j["estimated_latency"] = r.estimated_latency;
  j["propagation"] = r.propagation;
  j["comm_seconds"] = {{"pull_network", r.comm.pull_network},
                       {"pull_local", r.comm.pull_local},
                       {"push_network", r.comm.push_network},
                       {"push_local", r.comm.push_local},
                       {"after_overlap", r.comm_after_overlap}};
  j["iteration_latency"] = r.iteration_latency;
  Json pipes = Json::array();
  for (const auto& p : r.per_pipeline) {
    Json e = {{"simulated", p.simulated},
              {"estimated", p.estimated},
              {"bubble_fraction", p.bubble_fraction},
              {"estimate_delta", p.estimate_delta},
              {"microbatch_times", p.microbatch_times}};
    if (with_timeline) {
      Json tl = Json::array();
      for (const auto& op : p.timeline)
        tl.push_back({{"stage", op.stage}, {"mb", op.microbatch}, {"op", op.forward ? "F" : "B"}, {"start", op.start},
                      {"end", op.end}});
      e["timeline"] = tl;
    }
    pipes.push_back(e);
  }
  j["per_pipeline"] = pipes;
  return j;
}

inline Json to_json(const Comparison& c) {
  Json j = header("comparison");
  Json rows = Json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"policy", r.name},
                    {"strategy", r.strategy},
                    {"mean", r.mean},
                    {"stddev", r.stddev},
                    {"latencies", r.latencies},
                    {"balance", r.balance}});
  j["rows"] = rows;
  j["speedup"] = c.speedup;
  j["dynamic_choices"] = c.dynamic_choices;
  return j;
}

}  // namespace hydra::io
