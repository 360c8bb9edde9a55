// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hydra/io.hpp"
#include "hydra/workload.hpp"

using namespace hydra;
using io::Json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "hydra_test_cli";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    // Shared fixtures: a 16-GPU profile, a long-tail corpus and its candidates.
    ASSERT_EQ(run("fit --synthetic --n-gpus 16 --seed 1 -o p16.json --truth-out truth16.json "
                  "--samples-out samples16.json").code,
              0);
    ASSERT_EQ(run("synth --n 20000 --context 32768 --seed 7 -o data.bin").code, 0);
    ASSERT_EQ(run("propose --data data.bin --profile p16.json -o c16.json").code, 0);
  }

  static Result run(const std::string& args) {
    const auto log = dir_ / "last.log";
    const std::string cmd =
        "cd '" + dir_.string() + "' && '" + HYDRA_PLANNER_BIN + "' " + args + " > '" + log.string() + "' 2>&1";
    const int st = std::system(cmd.c_str());
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(log)};
  }

  static fs::path at(const std::string& name) { return dir_ / name; }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  const auto r = run("synth -o x.bin");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--n"), std::string::npos);
  EXPECT_EQ(run("synth --n 10 --dist cauchy -o x.bin").code, 2);
}

TEST_F(Cli, SynthIsByteIdentical) {
  ASSERT_EQ(run("synth --dist lognormal --mu 6.9 --sigma 1.2 --n 5000 --context 32768 --seed 7 -o a.bin").code, 0);
  ASSERT_EQ(run("synth --dist lognormal --mu 6.9 --sigma 1.2 --n 5000 --context 32768 --seed 7 -o b.bin").code, 0);
  EXPECT_EQ(slurp(at("a.bin")), slurp(at("b.bin")));
  EXPECT_EQ(slurp(at("a.bin")).size(), 5000u * 4);
  const auto meta = io::read_json(at("a.bin.meta.json"));
  EXPECT_EQ(meta["run_config"]["workload"]["seed"], 7);
  EXPECT_EQ(meta["run_config"]["settings"]["n"], 5000);
}

TEST_F(Cli, StatsMatchesRecount) {
  ASSERT_EQ(run("stats --data data.bin -o stats.json").code, 0);
  const auto j = io::read_json(at("stats.json"));
  // Independent little-endian decode of the file.
  const auto bytes = slurp(at("data.bin"));
  std::int64_t total = 0, mx = 0;
  for (std::size_t i = 0; i < bytes.size(); i += 4) {
    std::int64_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(b)]);
    total += v;
    mx = std::max(mx, v);
  }
  EXPECT_EQ(j["records"].get<std::size_t>(), bytes.size() / 4);
  EXPECT_EQ(j["total_tokens"].get<std::int64_t>(), total);
  EXPECT_EQ(j["max"].get<std::int64_t>(), mx);
}

TEST_F(Cli, FitRecoversGroundTruth) {
  const auto fit = io::read_json(at("p16.json"));
  const auto truth = io::read_json(at("truth16.json"));
  ASSERT_EQ(fit["schemes"].size(), truth["schemes"].size());
  for (const auto& [name, t] : truth["schemes"].items()) {
    const auto& f = fit["schemes"][name];
    for (const char* k : {"a", "b", "c"}) {
      const double want = t[k].get<double>(), got = f[k].get<double>();
      EXPECT_NEAR(got, want, 1e-9 * std::max(1e-30, std::abs(want)) + 1e-24) << name << "." << k;
    }
    EXPECT_EQ(f["max_len"], t["max_len"]) << name;
  }
  // The cached MaxLen/UtilLen audit runs on load.
  EXPECT_NO_THROW(io::load_profile(at("p16.json")));
  ASSERT_EQ(run("fit --samples samples16.json -o refit.json").code, 0);
  EXPECT_EQ(io::read_json(at("refit.json"))["schemes"], fit["schemes"]);
}

TEST_F(Cli, FitRejectsRankDeficientScheme) {
  auto s = io::read_json(at("samples16.json"));
  auto& first = s["schemes"]["1x1x2"];
  first = Json::array({first[0], first[1]});
  io::write_json(at("thin.json"), s);
  const auto r = run("fit --samples thin.json -o thin_profile.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("1x1x2"), std::string::npos) << r.out;
}

TEST_F(Cli, TamperedProfileCacheRejected) {
  auto p = io::read_json(at("p16.json"));
  p["schemes"]["1x1x1"]["max_len"] = 1;
  io::write_json(at("stale.json"), p);
  const auto r = run("propose --data data.bin --profile stale.json -o c.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("max_len"), std::string::npos);
}

TEST_F(Cli, ProposeUniformTinyCorpusKeepsSafety) {
  ASSERT_EQ(run("fit --synthetic --n-gpus 4 -o p4.json").code, 0);
  {
    std::ofstream f(at("tiny.csv"));
    for (int i = 0; i < 64; ++i) f << 1000 << "\n";
  }
  ASSERT_EQ(run("propose --data tiny.csv --profile p4.json --context 4096 -o c4.json").code, 0);
  const auto c = io::read_json(at("c4.json"));
  bool safety = false;
  for (const auto& e : c["candidates"]) safety = safety || e["safety"].get<bool>();
  EXPECT_TRUE(safety);
  EXPECT_EQ(c["run_config"]["planner"]["n_gpus"], 4);
}

TEST_F(Cli, ProposeLongTailAndRevalidate) {
  const auto c = io::read_json(at("c16.json"));
  EXPECT_GE(c["candidates"].size(), 2u);
  auto bad = c;
  bad["candidates"][0]["strategy"] = "1x1x4*5";
  io::write_json(at("bad_cands.json"), bad);
  const auto r = run("plan --data data.bin --profile p16.json --candidates bad_cands.json --iterations 1 -o bad_run");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("1x1x4*5"), std::string::npos);
}

TEST_F(Cli, PlanSummaryStructure) {
  ASSERT_EQ(run("plan --data data.bin --profile p16.json --candidates c16.json --iterations 12 --seed 3 -o run").code,
            0);
  const auto s = io::read_json(at("run/summary.json"));
  ASSERT_EQ(s["iterations"].size(), 12u);
  int sum = 0;
  for (const auto& [k, v] : s["strategy_frequency"].items()) sum += v.get<int>();
  EXPECT_EQ(sum, 12);
  for (const auto& it : s["iterations"]) {
    EXPECT_TRUE(it.contains("strategy"));
    EXPECT_GT(it["estimated_latency"].get<double>(), 0);
  }
  EXPECT_TRUE(fs::exists(at("run/plans/iter_0011.json")));
}

TEST_F(Cli, SingleCandidateAlwaysSelected) {
  Json c = io::header("candidates");
  c["n_gpus"] = 16;
  c["candidates"] = Json::array({{{"strategy", "2x1x1*8"}}});
  io::write_json(at("one.json"), c);
  ASSERT_EQ(run("plan --data data.bin --profile p16.json --candidates one.json --iterations 5 --context 16384 "
                "-o one_run").code,
            0);
  const auto s = io::read_json(at("one_run/summary.json"));
  for (const auto& it : s["iterations"]) EXPECT_EQ(it["strategy"], "2x1x1*8");
}

TEST_F(Cli, SafetyFallbackFlagged) {
  {
    std::ofstream f(at("long.csv"));
    for (int i = 0; i < 10; ++i) f << 20000 << "\n";
  }
  Json c = io::header("candidates");
  c["n_gpus"] = 16;
  c["candidates"] = Json::array({{{"strategy", "1x1x1*16"}}, {{"strategy", "1x1x4*4"}, {"safety", true}}});
  io::write_json(at("fallback.json"), c);
  ASSERT_EQ(run("plan --data long.csv --profile p16.json --candidates fallback.json --iterations 3 -o fb").code, 0);
  for (const auto& it : io::read_json(at("fb/summary.json"))["iterations"]) {
    EXPECT_EQ(it["strategy"], "1x1x4*4");
    EXPECT_TRUE(it["safety_fallback"].get<bool>());
  }
  // Without the safety candidate nothing can serve the batch.
  c["candidates"].erase(1);
  io::write_json(at("nofallback.json"), c);
  EXPECT_EQ(run("plan --data long.csv --profile p16.json --candidates nofallback.json --iterations 1 -o nofb").code, 1);
}

TEST_F(Cli, SimulatePlansWithCommPlans) {
  ASSERT_EQ(run("plan --data data.bin --profile p16.json --candidates c16.json --iterations 4 -o srun").code, 0);
  ASSERT_EQ(run("simulate --plans srun --profile p16.json --commplan --dot -o ssim").code, 0);
  EXPECT_TRUE(fs::exists(at("ssim/simulation.csv")));
  EXPECT_TRUE(fs::exists(at("ssim/comm/volumes.csv")));
  bool pull = false, push = false, dot = false;
  for (const auto& e : fs::directory_iterator(at("ssim/comm"))) {
    const auto n = e.path().filename().string();
    pull = pull || n.find(".pull.json") != std::string::npos;
    push = push || n.find(".push.json") != std::string::npos;
    dot = dot || e.path().extension() == ".dot";
  }
  EXPECT_TRUE(pull && push && dot);
  const auto rep = io::read_json(at("ssim/sim/iter_0000.json"));
  EXPECT_GT(rep["report"]["iteration_latency"].get<double>(), 0);
}

TEST_F(Cli, SimulateAuditFailureIsNamed) {
  ASSERT_EQ(run("plan --data data.bin --profile p16.json --candidates c16.json --iterations 1 -o trun").code, 0);
  auto p = io::read_json(at("trun/plans/iter_0000.json"));
  p["plan"]["estimated_latency"] = p["plan"]["estimated_latency"].get<double>() + 1;
  io::write_json(at("trun/plans/iter_0000.json"), p);
  const auto r = run("simulate --plans trun --profile p16.json -o tsim");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("audit"), std::string::npos) << r.out;
}

TEST_F(Cli, AblationAndReport) {
  const auto r = run("simulate --ablation --data data.bin --profile p16.json --candidates c16.json --iterations 6 "
                     "--commplan -o abl");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("+-"), std::string::npos);
  const auto cmp = io::read_json(at("abl/comparison.json"));
  ASSERT_EQ(cmp["rows"].size(), 4u);
  for (const auto& row : cmp["rows"]) {
    EXPECT_EQ(row["latencies"].size(), 6u);
    EXPECT_TRUE(row.contains("stddev"));
  }
  EXPECT_TRUE(fs::exists(at("abl/comm/volumes.csv")));
  ASSERT_EQ(run("report --input abl/comparison.json -o rep").code, 0);
  const auto csv = slurp(at("rep/report.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(io::read_json(at("rep/series.json"))["data"]["values"].size(), 24u);
  EXPECT_EQ(run("simulate --plans abl --ablation --profile p16.json -o x").code, 2);
}
