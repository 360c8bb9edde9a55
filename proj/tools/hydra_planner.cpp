// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0
//
// hydra_planner: synth, stats, fit, propose, plan, simulate, report.
// Exit codes: 0 success, 1 infeasible or audit failure, 2 usage or input error.

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "hydra/hydra.hpp"

using namespace hydra;
using io::Json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInfeasible = 1;
constexpr int kExitUsage = 2;

Json with_config(Json j, const io::RunConfig& cfg) {
  j["run_config"] = io::to_json(cfg);
  return j;
}

std::string iteration_name(std::size_t it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%04zu.json", it);
  return buf;
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << x;
  return s.str();
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (c == '*' || c == '+') c = c == '*' ? '_' : '-';
  return s;
}

LengthSample truncated(const LengthSample& s, Tokens context) {
  LengthSample out;
  out.lengths.reserve(s.lengths.size());
  for (Tokens l : s.lengths) out.lengths.push_back(std::min(l, context));
  return out;
}

PlanOptions plan_options(const io::RunConfig& cfg) {
  PlanOptions o;
  o.trials = cfg.trials;
  o.seed = cfg.seed;
  o.exact_dispatch_cutoff = cfg.exact_dispatch_cutoff;
  o.pack.exact_cutover = cfg.exact_pack_cutover;
  return o;
}

OverlapMode overlap_mode(const std::string& s) {
  if (s == "full") return OverlapMode::kFull;
  if (s == "none") return OverlapMode::kNone;
  throw InvalidArgument("overlap must be 'full' or 'none', got '" + s + "'");
}

/// Mini-batch of iteration `it`; plan and simulate --ablation draw the same ones.
MiniBatch iteration_batch(const LengthSample& corpus, const io::RunConfig& cfg, std::size_t it) {
  return sample_minibatch(corpus, cfg.token_budget, cfg.context_length, derive_seed(cfg.seed, "iteration", it));
}

// ---------------------------------------------------------------------------
// synth / stats
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string dist = "lognormal";
  double mu = 6.9, sigma = 1.2, alpha = 1.5, xmin = 256;
  std::size_t n = 0;
  std::string format;
};

int cmd_synth(const SynthArgs& a, io::RunConfig cfg) {
  LengthDistribution dist;
  if (a.dist == "lognormal")
    dist = LogNormal{a.mu, a.sigma};
  else if (a.dist == "pareto")
    dist = Pareto{a.alpha, a.xmin};
  else
    throw InvalidArgument("unknown distribution '" + a.dist + "' (lognormal, pareto)");
  const auto sample = synth_longtail(dist, a.n, cfg.context_length, cfg.seed);
  const fs::path out(cfg.output);
  const auto format = a.format.empty() ? length_format_for_path(out) : parse_length_format(a.format);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_lengths(sample, out, format);

  cfg.extra = {{"dist", a.dist}, {"n", a.n}, {"format", a.format.empty() ? "auto" : a.format}};
  if (a.dist == "lognormal")
    cfg.extra["params"] = {{"mu", a.mu}, {"sigma", a.sigma}};
  else
    cfg.extra["params"] = {{"alpha", a.alpha}, {"xmin", a.xmin}};
  Json meta = io::header("dataset");
  meta["records"] = sample.size();
  meta["total_tokens"] = sample.total_tokens();
  io::write_json(out.string() + ".meta.json", with_config(meta, cfg));
  std::cout << "wrote " << sample.size() << " lengths (" << sample.total_tokens() << " tokens) to " << out.string()
            << "\n";
  return 0;
}

Json length_stats(const LengthSample& s, Tokens context, Tokens bin_width) {
  std::vector<Tokens> v = s.lengths;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
  };
  std::int64_t over = 0;
  for (Tokens l : v) over += l > context;
  Json j = io::header("stats");
  j["records"] = v.size();
  j["total_tokens"] = s.total_tokens();
  j["min"] = v.front();
  j["max"] = v.back();
  j["mean"] = static_cast<double>(s.total_tokens()) / static_cast<double>(v.size());
  j["quantiles"] = {{"p50", q(0.5)}, {"p90", q(0.9)}, {"p99", q(0.99)}, {"p999", q(0.999)}};
  j["over_context"] = over;
  const auto h = build_histogram(truncated(s, context), bin_width);
  j["histogram"] = {{"bin_width", bin_width}, {"counts", h.counts}};
  return j;
}

int cmd_stats(Tokens bin_width, io::RunConfig cfg) {
  const auto sample = load_lengths(cfg.dataset);
  cfg.extra = {{"bin_width", bin_width}};
  const auto j = with_config(length_stats(sample, cfg.context_length, bin_width), cfg);
  if (!cfg.output.empty()) io::write_json(cfg.output, j);
  std::cout << "records       " << j["records"] << "\n"
            << "total_tokens  " << j["total_tokens"] << "\n"
            << "min / max     " << j["min"] << " / " << j["max"] << "\n"
            << "mean          " << fmt(j["mean"].get<double>(), 2) << "\n"
            << "p50 p90 p99   " << j["quantiles"]["p50"] << " " << j["quantiles"]["p90"] << " "
            << j["quantiles"]["p99"] << "\n"
            << "over context  " << j["over_context"] << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string samples;
  bool synthetic = false;
  double noise = 0;
  int points = 16;
  double util_threshold = 0.85;
  std::string samples_out;
  std::string truth_out;
};

Json samples_json(const ModelShape& m, const HardwareSpec& hw, const MemoryConstants& k,
                  const std::map<ParallelScheme, std::vector<ProfileSample>>& samples) {
  Json j = io::header("profile_samples");
  j["model"] = io::shape_json(m);
  j["hardware"] = io::hardware_json(hw);
  j["memory"] = io::memory_json(k);
  Json s = Json::object();
  for (const auto& [scheme, v] : samples) {
    Json arr = Json::array();
    for (const auto& x : v) arr.push_back({{"l", x.l}, {"t", x.t}});
    s[scheme.to_string()] = arr;
  }
  j["schemes"] = s;
  return j;
}

int cmd_fit(const FitArgs& a, io::RunConfig cfg) {
  if (a.synthetic == !a.samples.empty()) throw InvalidArgument("fit: give exactly one of --samples or --synthetic");
  ModelShape m;
  HardwareSpec hw;
  MemoryConstants k;
  std::map<ParallelScheme, std::vector<ProfileSample>> samples;
  if (a.synthetic) {
    m = presets::reference_model();
    hw = presets::reference_hardware(cfg.n_gpus);
    k = presets::reference_memory();
    std::map<ParallelScheme, std::pair<LatencyCoeffs, Tokens>> truth;
    std::map<ParallelScheme, LatencyCoeffs> truth_coeffs;
    for (const auto& s : enumerate_default_schemes(cfg.n_gpus, static_cast<int>(m.layers))) {
      const Tokens ml = max_len_or_zero(s, m, hw, k);
      if (ml < 1) continue;  // cannot be profiled: out of memory at any length
      truth[s] = {presets::reference_coeffs(s, m, hw), ml};
      truth_coeffs[s] = truth[s].first;
    }
    samples = synth_profile(truth, a.noise, cfg.seed, a.points);
    if (!a.truth_out.empty())
      io::write_json(a.truth_out, with_config(io::to_json(CostProfile(m, hw, k, truth_coeffs, a.util_threshold)), cfg));
    if (!a.samples_out.empty()) io::write_json(a.samples_out, with_config(samples_json(m, hw, k, samples), cfg));
  } else {
    const auto j = io::read_json(a.samples);
    io::expect_kind(j, "profile_samples");
    m = io::shape_from(j.at("model"));
    hw = io::hardware_from(j.at("hardware"));
    k = io::memory_from(j.at("memory"));
    for (const auto& [name, arr] : j.at("schemes").items()) {
      auto& v = samples[parse_scheme(name)];
      for (const auto& e : arr)
        v.push_back(io::parsing("samples of " + name, [&] {
          return ProfileSample{e.at("l").get<Tokens>(), e.at("t").get<double>()};
        }));
    }
    cfg.n_gpus = hw.n_gpus;
  }

  std::map<ParallelScheme, LatencyCoeffs> coeffs;
  Json quality = Json::object();
  for (const auto& [s, v] : samples) {
    FitResult r;
    try {
      r = fit_latency(v);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("scheme " + s.to_string() + ": " + e.what());
    }
    coeffs[s] = r.coeffs;
    quality[s.to_string()] = {{"samples", v.size()},
                              {"weighted_rms", r.weighted_rms},
                              {"max_rel_error", r.max_rel_error},
                              {"support", r.support}};
  }
  const CostProfile profile(m, hw, k, coeffs, a.util_threshold);
  const auto bad = profile.audit_caches();
  if (!bad.empty()) throw AuditError("profile cache mismatch for " + bad.front());

  cfg.extra = {{"mode", a.synthetic ? "synthetic" : "samples"},
               {"samples", a.samples},
               {"noise", a.noise},
               {"points", a.points},
               {"util_threshold", a.util_threshold}};
  Json j = io::to_json(profile);
  j["fit"] = quality;
  io::write_json(cfg.output, with_config(j, cfg));
  std::cout << "scheme        a            b            c            MaxLen  UtilLen  rms\n";
  for (const auto& [s, c] : coeffs) {
    std::printf("%-12s  %-11.4e  %-11.4e  %-11.4e  %-6lld  %-7lld  %.2e\n", s.to_string().c_str(), c.a, c.b, c.c,
                static_cast<long long>(profile.max_len(s)), static_cast<long long>(profile.util_len(s)),
                quality[s.to_string()]["weighted_rms"].get<double>());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// propose
// ---------------------------------------------------------------------------

struct ProposeArgs {
  Tokens bin_width = 128;
  Tokens l_step = 128;
  double n_step = 0.1;
  double d_step = 0.1;
  std::size_t cap = 16;
};

int cmd_propose(const ProposeArgs& a, io::RunConfig cfg) {
  const auto profile = io::load_profile(cfg.profile);
  cfg.n_gpus = profile.hardware().n_gpus;
  const auto corpus = truncated(load_lengths(cfg.dataset), cfg.context_length);
  const DpSteps steps{a.n_step, a.d_step, a.l_step};
  ProposeOptions o;
  o.steps = steps;
  o.cap = a.cap;
  const auto cs = propose(build_histogram(corpus, a.bin_width), cfg.n_gpus, cfg.context_length,
                          profile.feasible_schemes(), profile, o);
  cfg.extra = {{"bin_width", a.bin_width},
               {"l_step", a.l_step},
               {"n_step", a.n_step},
               {"d_step", a.d_step},
               {"cap", a.cap}};
  io::write_json(cfg.output, with_config(io::to_json(cs, cfg.n_gpus, cfg.context_length, steps), cfg));
  for (const auto& c : cs.candidates)
    std::cout << (c.safety ? "* " : "  ") << c.strategy.to_string() << "  L=" << c.provenance_l
              << "  score=" << fmt(c.dp_score) << "\n";
  std::cout << cs.candidates.size() << " candidates (* = homogeneous safety candidate)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

int cmd_plan(io::RunConfig cfg) {
  const auto profile = io::load_profile(cfg.profile);
  cfg.n_gpus = profile.hardware().n_gpus;
  const auto cands = io::candidates_from(io::read_json(cfg.candidates), profile);
  const auto corpus = load_lengths(cfg.dataset);
  const fs::path dir(cfg.output);
  fs::create_directories(dir / "plans");
  const PlanOptions opts = plan_options(cfg);

  Json iters = Json::array();
  std::map<std::string, int> freq;
  std::size_t failed = 0;
  for (std::size_t it = 0; it < static_cast<std::size_t>(cfg.iterations); ++it) {
    const auto mb = iteration_batch(corpus, cfg, it);
    PlanOptions o = opts;
    o.seed = derive_seed(cfg.seed, "iteration", it);
    Json row{{"iteration", it}, {"sequences", mb.lengths.size()}, {"tokens", mb.total_tokens()}};
    try {
      const auto sel = select_strategy(mb.lengths, cands.strategies, profile, o);
      std::size_t infeasible = 0;
      Json report = Json::array();
      for (const auto& r : sel.report) {
        infeasible += !r.feasible;
        Json e{{"strategy", r.strategy}, {"gpus", r.gpus}, {"feasible", r.feasible}};
        if (r.feasible) {
          e["estimated_latency"] = r.estimated_latency;
          e["has_empty_pipeline"] = r.has_empty_pipeline;
        } else {
          e["reason"] = r.reason;
        }
        report.push_back(e);
      }
      const bool safety = cands.safety[sel.best_index];
      Json j = io::header("plan");
      j["iteration"] = it;
      j["minibatch_seed"] = mb.seed;
      j["lengths"] = mb.lengths;
      j["selected"] = sel.best_index;
      j["safety_fallback"] = safety && infeasible > 0;
      j["candidates"] = report;
      j["plan"] = io::to_json(sel.best);
      io::write_json(dir / "plans" / iteration_name(it), with_config(j, cfg));
      const auto name = sel.best.strategy.to_string();
      ++freq[name];
      row["strategy"] = name;
      row["estimated_latency"] = sel.best.estimated_latency;
      row["safety"] = safety;
      row["safety_fallback"] = safety && infeasible > 0;
      row["infeasible_candidates"] = infeasible;
    } catch (const InfeasibleError& e) {
      ++failed;
      row["error"] = e.what();
    }
    iters.push_back(row);
  }

  Json summary = io::header("plan_summary");
  summary["iterations"] = iters;
  Json f = Json::object();
  for (const auto& [s, n] : freq) f[s] = n;
  summary["strategy_frequency"] = f;
  summary["failed_iterations"] = failed;
  io::write_json(dir / "summary.json", with_config(summary, cfg));

  std::cout << "strategy frequency over " << cfg.iterations << " iterations\n";
  for (const auto& [s, n] : freq) std::printf("  %4d  %s\n", n, s.c_str());
  if (failed > 0) {
    std::cerr << "error: " << failed << " iteration(s) had no feasible candidate\n";
    return kExitInfeasible;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimArgs {
  std::string plans;
  bool ablation = false;
  bool commplan = false;
  bool dot = false;
  bool timeline = false;
  double forward_fraction = 1.0 / 3.0;
};

SimConfig sim_config(const SimArgs& a, const io::RunConfig& cfg) {
  SimConfig s;
  s.forward_fraction = a.forward_fraction;
  s.overlap = overlap_mode(cfg.overlap);
  return s;
}

Json volume_rows(const CommPlan& c, double W) {
  return io::to_json(c, W, parse_strategy(c.strategy))["per_gpu_volume"];
}

/// Writes pull/push plans for `s` under dir; throws AuditError on a violation.
std::pair<CommPlan, CommPlan> emit_comm(const Strategy& s, const CostProfile& profile, const fs::path& dir, bool dot,
                                        const io::RunConfig& cfg, std::string& csv) {
  const int n = profile.hardware().n_gpus;
  const int layers = static_cast<int>(profile.shape().layers);
  const double W = param_bytes(profile.shape());
  auto pull = pull_plan(s, n, layers);
  auto push = push_plan(s, n, layers);
  const auto stem = file_safe(s.to_string());
  for (const CommPlan* c : {&pull, &push}) {
    const auto bad = audit_comm_plan(*c, s);
    if (!bad.empty()) throw AuditError("comm plan " + s.to_string() + ": " + bad.front());
    const std::string dirn = c->direction == Direction::kPull ? "pull" : "push";
    io::write_json(dir / (stem + "." + dirn + ".json"), with_config(io::to_json(*c, W, s), cfg));
    if (dot) io::write_text(dir / (stem + "." + dirn + ".dot"), to_dot(*c));
    for (const auto& v : volume_rows(*c, W))
      csv += s.to_string() + "," + dirn + "," + v["rank"].dump() + "," + v["sent_bytes"].dump() + "," +
             v["received_bytes"].dump() + "," + v["demand_sent_bytes"].dump() + "," +
             v["demand_received_bytes"].dump() + "," + v["reduce_scatter_sent_bytes"].dump() + "\n";
  }
  return {std::move(pull), std::move(push)};
}

int simulate_plans(const SimArgs& a, io::RunConfig cfg) {
  const auto profile = io::load_profile(cfg.profile);
  cfg.n_gpus = profile.hardware().n_gpus;
  const fs::path in(a.plans), out(cfg.output);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in / "plans"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidArgument("no plan files under " + (in / "plans").string());

  const SimConfig sc = sim_config(a, cfg);
  const double W = param_bytes(profile.shape());
  std::map<std::string, std::pair<CommPlan, CommPlan>> comm;
  std::string vol_csv = "strategy,direction,rank,sent_bytes,received_bytes,demand_sent_bytes,demand_received_bytes,"
                        "reduce_scatter_sent_bytes\n";
  std::string csv = "iteration,strategy,estimated,propagation,comm_after_overlap,iteration_latency\n";
  fs::create_directories(out / "sim");
  if (a.commplan) fs::create_directories(out / "comm");
  for (const auto& f : files) {
    const auto j = io::read_json(f);
    io::expect_kind(j, "plan");
    const auto lengths = io::parsing("plan", [&] { return j.at("lengths").get<std::vector<Tokens>>(); });
    const auto plan = io::plan_from(j.at("plan"), lengths, profile);
    const auto key = plan.strategy.to_string();
    const CommPlan *pull = nullptr, *push = nullptr;
    if (a.commplan) {
      auto it = comm.find(key);
      if (it == comm.end()) it = comm.emplace(key, emit_comm(plan.strategy, profile, out / "comm", a.dot, cfg, vol_csv)).first;
      pull = &it->second.first;
      push = &it->second.second;
    }
    const auto rep = simulate_strategy(plan, pull, push, W, profile, sc, a.timeline);
    Json r = io::header("sim_report");
    r["iteration"] = j.at("iteration");
    r["report"] = io::to_json(rep, a.timeline);
    io::write_json(out / "sim" / f.filename(), with_config(r, cfg));
    csv += j.at("iteration").dump() + "," + key + "," + Json(rep.estimated_latency).dump() + "," +
           Json(rep.propagation).dump() + "," + Json(rep.comm_after_overlap).dump() + "," +
           Json(rep.iteration_latency).dump() + "\n";
  }
  io::write_text(out / "simulation.csv", csv);
  if (a.commplan) io::write_text(out / "comm" / "volumes.csv", vol_csv);
  std::cout << "simulated " << files.size() << " plans into " << (out / "sim").string() << "\n";
  return 0;
}

int simulate_ablation(const SimArgs& a, io::RunConfig cfg) {
  const auto profile = io::load_profile(cfg.profile);
  cfg.n_gpus = profile.hardware().n_gpus;
  const auto cands = io::candidates_from(io::read_json(cfg.candidates), profile);
  const auto corpus = load_lengths(cfg.dataset);
  std::vector<std::vector<Tokens>> mbs;
  for (std::size_t it = 0; it < static_cast<std::size_t>(cfg.iterations); ++it)
    mbs.push_back(iteration_batch(corpus, cfg, it).lengths);
  CompareOptions o;
  o.context_length = cfg.context_length;
  o.plan = plan_options(cfg);
  o.sim = sim_config(a, cfg);
  const auto cmp = compare_policies(mbs, cands.strategies, profile, o);

  const fs::path out(cfg.output);
  io::write_json(out / "comparison.json", with_config(io::to_json(cmp), cfg));
  std::string csv = "policy,strategy,mean,stddev,speedup_over_i\n";
  for (std::size_t r = 0; r < cmp.rows.size(); ++r)
    csv += "\"" + cmp.rows[r].name + "\"," + cmp.rows[r].strategy + "," + Json(cmp.rows[r].mean).dump() + "," +
           Json(cmp.rows[r].stddev).dump() + "," + Json(cmp.speedup[0][r]).dump() + "\n";
  io::write_text(out / "comparison.csv", csv);
  if (a.commplan) {
    fs::create_directories(out / "comm");
    std::string vol_csv = "strategy,direction,rank,sent_bytes,received_bytes,demand_sent_bytes,"
                          "demand_received_bytes,reduce_scatter_sent_bytes\n";
    std::set<std::string> done;
    for (const auto& r : cmp.rows)
      if (!r.strategy.empty() && done.insert(r.strategy).second)
        emit_comm(parse_strategy(r.strategy), profile, out / "comm", a.dot, cfg, vol_csv);
    for (const auto& s : cmp.dynamic_choices)
      if (done.insert(s).second) emit_comm(parse_strategy(s), profile, out / "comm", a.dot, cfg, vol_csv);
    io::write_text(out / "comm" / "volumes.csv", vol_csv);
  }
  for (std::size_t r = 0; r < cmp.rows.size(); ++r) {
    const auto& row = cmp.rows[r];
    std::printf("%-50s %-24s %s +- %s s  (%sx)\n", row.name.c_str(), row.strategy.empty() ? "-" : row.strategy.c_str(),
                fmt(row.mean).c_str(), fmt(row.stddev).c_str(), fmt(cmp.speedup[0][r], 3).c_str());
  }
  return 0;
}

int cmd_simulate(const SimArgs& a, io::RunConfig cfg) {
  cfg.extra = {{"plans", a.plans},
               {"ablation", a.ablation},
               {"commplan", a.commplan},
               {"dot", a.dot},
               {"timeline", a.timeline},
               {"forward_fraction", a.forward_fraction}};
  if (a.ablation == !a.plans.empty()) throw InvalidArgument("simulate: give exactly one of --plans or --ablation");
  if (a.ablation) {
    if (cfg.dataset.empty() || cfg.candidates.empty())
      throw InvalidArgument("simulate --ablation needs --data and --candidates");
    return simulate_ablation(a, cfg);
  }
  return simulate_plans(a, cfg);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& input, io::RunConfig cfg) {
  const auto j = io::read_json(input);
  io::expect_kind(j, "comparison");
  const fs::path out(cfg.output);
  cfg.extra = {{"input", input}};
  std::string csv = "policy,strategy,mean,stddev\n";
  Json values = Json::array();
  for (const auto& r : j.at("rows")) {
    const auto name = r.at("policy").get<std::string>();
    csv += "\"" + name + "\"," + r.at("strategy").get<std::string>() + "," + r.at("mean").dump() + "," +
           r.at("stddev").dump() + "\n";
    const auto lat = r.at("latencies").get<std::vector<double>>();
    for (std::size_t it = 0; it < lat.size(); ++it)
      values.push_back({{"policy", name}, {"iteration", it}, {"latency", lat[it]}});
  }
  io::write_text(out / "report.csv", csv);
  Json series;
  series["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
  series["data"] = {{"values", values}};
  series["mark"] = "line";
  series["encoding"] = {{"x", {{"field", "iteration"}, {"type", "quantitative"}}},
                        {"y", {{"field", "latency"}, {"type", "quantitative"}, {"title", "iteration latency (s)"}}},
                        {"color", {{"field", "policy"}, {"type", "nominal"}}}};
  series["usermeta"] = with_config(io::header("report_series"), cfg);
  io::write_json(out / "series.json", series);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous pipeline planner for variable-length training batches"};
  app.require_subcommand(1);
  io::RunConfig cfg;

  auto add_workload = [&](CLI::App* c) {
    c->add_option("--budget", cfg.token_budget, "Token budget per iteration")->capture_default_str();
    c->add_option("--context", cfg.context_length, "Context length")->capture_default_str();
    c->add_option("--iterations", cfg.iterations, "Iterations")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  };
  auto add_planner = [&](CLI::App* c) {
    c->add_option("--trials", cfg.trials, "Greedy dispatch trials")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--exact-dispatch-cutoff", cfg.exact_dispatch_cutoff, "Exact dispatch when B <= cutoff")
        ->capture_default_str();
    c->add_option("--exact-pack-cutover", cfg.exact_pack_cutover, "Exact packing when U <= cutover")
        ->capture_default_str();
    c->add_option("--overlap", cfg.overlap, "Communication overlap: full or none")
        ->capture_default_str()
        ->check(CLI::IsMember({"full", "none"}));
  };

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic long-tail length corpus");
  c_synth->add_option("--dist", synth.dist, "lognormal or pareto")->capture_default_str();
  c_synth->add_option("--mu", synth.mu)->capture_default_str();
  c_synth->add_option("--sigma", synth.sigma)->capture_default_str();
  c_synth->add_option("--alpha", synth.alpha)->capture_default_str();
  c_synth->add_option("--xmin", synth.xmin)->capture_default_str();
  c_synth->add_option("--n", synth.n, "Number of sequences")->required()->check(CLI::PositiveNumber);
  c_synth->add_option("--context", cfg.context_length, "Clamp lengths to this")->capture_default_str();
  c_synth->add_option("--seed", cfg.seed)->capture_default_str();
  c_synth->add_option("--format", synth.format, "csv, jsonl or binary-u32 (default: by extension)");
  c_synth->add_option("-o,--output", cfg.output, "Output length file")->required();

  Tokens stats_bin = 128;
  auto* c_stats = app.add_subcommand("stats", "Summarize a length corpus");
  c_stats->add_option("--data", cfg.dataset, "Length file")->required()->check(CLI::ExistingFile);
  c_stats->add_option("--context", cfg.context_length)->capture_default_str();
  c_stats->add_option("--bin-width", stats_bin)->capture_default_str()->check(CLI::PositiveNumber);
  c_stats->add_option("-o,--output", cfg.output, "Optional JSON output");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit latency coefficients and write a cost profile");
  c_fit->add_option("--samples", fit.samples, "profile_samples JSON")->check(CLI::ExistingFile);
  c_fit->add_flag("--synthetic", fit.synthetic, "Profile the built-in reference model");
  c_fit->add_option("--n-gpus", cfg.n_gpus, "Cluster size for --synthetic")->capture_default_str();
  c_fit->add_option("--noise", fit.noise, "Relative timing noise for --synthetic")->capture_default_str();
  c_fit->add_option("--points", fit.points, "Profiling lengths per scheme")->capture_default_str();
  c_fit->add_option("--seed", cfg.seed)->capture_default_str();
  c_fit->add_option("--util-threshold", fit.util_threshold)->capture_default_str();
  c_fit->add_option("--samples-out", fit.samples_out, "Write the synthetic samples here");
  c_fit->add_option("--truth-out", fit.truth_out, "Write the ground-truth profile here");
  c_fit->add_option("-o,--output", cfg.output, "Output profile")->required();

  ProposeArgs prop;
  auto* c_prop = app.add_subcommand("propose", "Propose candidate strategies from a corpus");
  c_prop->add_option("--data", cfg.dataset)->required()->check(CLI::ExistingFile);
  c_prop->add_option("--profile", cfg.profile)->required()->check(CLI::ExistingFile);
  c_prop->add_option("--context", cfg.context_length, "Longest length to plan for")->capture_default_str();
  c_prop->add_option("--bin-width", prop.bin_width)->capture_default_str();
  c_prop->add_option("--l-step", prop.l_step)->capture_default_str();
  c_prop->add_option("--n-step", prop.n_step)->capture_default_str();
  c_prop->add_option("--d-step", prop.d_step)->capture_default_str();
  c_prop->add_option("--cap", prop.cap, "Maximum number of candidates")->capture_default_str();
  c_prop->add_option("-o,--output", cfg.output)->required();

  auto* c_plan = app.add_subcommand("plan", "Select a strategy and plan every iteration");
  c_plan->add_option("--data", cfg.dataset)->required()->check(CLI::ExistingFile);
  c_plan->add_option("--profile", cfg.profile)->required()->check(CLI::ExistingFile);
  c_plan->add_option("--candidates", cfg.candidates)->required()->check(CLI::ExistingFile);
  add_workload(c_plan);
  add_planner(c_plan);
  c_plan->add_option("-o,--output", cfg.output, "Output directory")->required();

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate plans or run the policy ablation");
  c_sim->add_option("--plans", sim.plans, "Directory written by 'plan'")->check(CLI::ExistingDirectory);
  c_sim->add_flag("--ablation", sim.ablation, "Compare the four policies on fresh mini-batches");
  c_sim->add_flag("--commplan", sim.commplan, "Also emit pull/push plans and volume tables");
  c_sim->add_flag("--dot", sim.dot, "With --commplan, also write Graphviz files");
  c_sim->add_flag("--timeline", sim.timeline, "Keep per-op schedules in reports");
  c_sim->add_option("--forward-fraction", sim.forward_fraction)->capture_default_str();
  c_sim->add_option("--data", cfg.dataset)->check(CLI::ExistingFile);
  c_sim->add_option("--profile", cfg.profile)->required()->check(CLI::ExistingFile);
  c_sim->add_option("--candidates", cfg.candidates)->check(CLI::ExistingFile);
  add_workload(c_sim);
  add_planner(c_sim);
  c_sim->add_option("-o,--output", cfg.output, "Output directory")->required();

  std::string report_in;
  auto* c_report = app.add_subcommand("report", "Turn a comparison into CSV and a plot series");
  c_report->add_option("--input", report_in, "comparison.json")->required()->check(CLI::ExistingFile);
  c_report->add_option("-o,--output", cfg.output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    auto* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    if (sub == c_synth) return cmd_synth(synth, cfg);
    if (sub == c_stats) return cmd_stats(stats_bin, cfg);
    if (sub == c_fit) return cmd_fit(fit, cfg);
    if (sub == c_prop) return cmd_propose(prop, cfg);
    if (sub == c_plan) return cmd_plan(cfg);
    if (sub == c_sim) return cmd_simulate(sim, cfg);
    return cmd_report(report_in, cfg);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const AuditError& e) {
    std::cerr << "audit failure: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
