// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "hydra/io.hpp"
#include "hydra/presets.hpp"
#include "hydra/workload.hpp"

using namespace hydra;
using io::Json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "hydra_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(ExpectKind, Errors) {
  EXPECT_THROW(io::expect_kind(Json::array(), "profile"), ParseError);
  EXPECT_THROW(io::expect_kind(Json{{"kind", "profile"}}, "profile"), ParseError);
  EXPECT_THROW(io::expect_kind(Json{{"schema_version", 2}, {"kind", "profile"}}, "profile"), ParseError);
  EXPECT_THROW(io::expect_kind(io::header("plan"), "profile"), ParseError);
  EXPECT_NO_THROW(io::expect_kind(io::header("profile"), "profile"));
}

TEST(ReadJson, MissingAndMalformed) {
  EXPECT_THROW(io::read_json(scratch("does_not_exist.json")), ParseError);
  io::write_text(scratch("bad.json"), "{ not json");
  EXPECT_THROW(io::read_json(scratch("bad.json")), ParseError);
}

TEST(Profile, RoundTrip) {
  const auto p = presets::reference_profile(8);
  const auto path = scratch("profile.json");
  io::write_json(path, io::to_json(p));
  const auto q = io::load_profile(path);
  EXPECT_EQ(q.coefficients().size(), p.coefficients().size());
  for (const auto& [s, c] : p.coefficients()) {
    EXPECT_EQ(q.coefficients().at(s).a, c.a);
    EXPECT_EQ(q.coefficients().at(s).b, c.b);
    EXPECT_EQ(q.coefficients().at(s).c, c.c);
    EXPECT_EQ(q.max_len(s), p.max_len(s));
    EXPECT_EQ(q.util_len(s), p.util_len(s));
  }
  EXPECT_EQ(io::to_json(q).dump(), io::to_json(p).dump());
}

TEST(Profile, StaleCacheRejected) {
  auto j = io::to_json(presets::reference_profile(4));
  auto& first = j["schemes"].begin().value();
  first["max_len"] = first["max_len"].get<Tokens>() + 1;
  EXPECT_THROW(io::profile_from(j), AuditError);
}

TEST(Profile, MissingFieldIsParseError) {
  auto j = io::to_json(presets::reference_profile(4));
  j["hardware"].erase("flops");
  EXPECT_THROW(io::profile_from(j), ParseError);
}

TEST(Candidates, RoundTripAndRevalidation) {
  const auto p = presets::reference_profile(8);
  CandidateSet cs;
  Candidate a;
  a.strategy = parse_strategy("2x1x1*2+1x1x1*4");
  a.safety = false;
  Candidate b;
  b.strategy = parse_strategy("1x1x2*4");
  b.safety = true;
  cs.candidates = {b, a};
  const auto j = io::to_json(cs, 8, 8192, DpSteps::integer(512));
  const auto back = io::candidates_from(j, p);
  ASSERT_EQ(back.strategies.size(), 2u);
  EXPECT_EQ(back.strategies[0].to_string(), "1x1x2*4");
  EXPECT_TRUE(back.safety[0]);
  EXPECT_FALSE(back.safety[1]);

  auto over = j;
  over["candidates"][0]["strategy"] = "1x1x2*5";
  EXPECT_THROW(io::candidates_from(over, p), AuditError);
  EXPECT_THROW(io::candidates_from(j, presets::reference_profile(16)), AuditError);
  auto empty = j;
  empty["candidates"] = Json::array();
  EXPECT_THROW(io::candidates_from(empty, p), ParseError);
}

TEST(Plan, RoundTripPreservesAssignment) {
  const auto p = presets::reference_profile(16);
  const auto corpus = synth_longtail(LogNormal{6.9, 1.2}, 5000, 32768, 3);
  const auto mb = sample_minibatch(corpus, 60000, 32768, 1).lengths;
  const auto plan = plan_strategy(mb, parse_strategy("8x1x1*1+1x1x1*8"), p);
  const auto j = io::to_json(plan);
  const auto back = io::plan_from(j, mb, p);
  EXPECT_EQ(back.strategy.to_string(), plan.strategy.to_string());
  EXPECT_EQ(back.members, plan.members);
  EXPECT_EQ(back.estimated_latency, plan.estimated_latency);
  EXPECT_EQ(io::to_json(back).dump(), j.dump());
}

TEST(Plan, TamperedPlanFailsAudit) {
  const auto p = presets::reference_profile(16);
  const std::vector<Tokens> mb{30000, 4000, 3000, 2000, 1000, 500};
  auto j = io::to_json(plan_strategy(mb, parse_strategy("8x1x1*1+1x1x1*8"), p));
  j["estimated_latency"] = j["estimated_latency"].get<double>() * 0.5;
  EXPECT_THROW(io::plan_from(j, mb, p), AuditError);
  auto k = io::to_json(plan_strategy(mb, parse_strategy("8x1x1*1+1x1x1*8"), p));
  k["pipelines"][0]["members"].push_back(99);
  EXPECT_THROW(io::plan_from(k, mb, p), ParseError);
}

TEST(CommPlanJson, Structure) {
  const auto s = parse_strategy("2x1x1*1+1x1x1*2");
  const auto plan = pull_plan(s, 4, 8);
  const auto j = io::to_json(plan, 1e9, s);
  EXPECT_EQ(j["kind"], "comm_plan");
  EXPECT_EQ(j["direction"], "pull");
  EXPECT_TRUE(j["audit"].empty());
  EXPECT_EQ(j["per_gpu_volume"].size(), 4u);
  EXPECT_EQ(j["primitives"].size(), plan.primitives.size());
}

TEST(SimReportJson, TimelineOptional) {
  const auto p = presets::reference_profile(8);
  const auto plan = plan_strategy({4000, 3000, 2000}, parse_strategy("1x2x1*4"), p);
  const auto rep = simulate_strategy(plan, nullptr, nullptr, 0, p, {}, true);
  EXPECT_FALSE(io::to_json(rep, false)["per_pipeline"][0].contains("timeline"));
  EXPECT_TRUE(io::to_json(rep, true)["per_pipeline"][0].contains("timeline"));
}

TEST(RunConfigJson, AllFieldsRecorded) {
  io::RunConfig c;
  c.command = "plan";
  c.seed = 42;
  c.extra = {{"bin_width", 128}};
  const auto j = io::to_json(c);
  EXPECT_EQ(j["command"], "plan");
  EXPECT_EQ(j["workload"]["seed"], 42);
  EXPECT_EQ(j["planner"]["exact_pack_cutover"], 12);
  EXPECT_EQ(j["settings"]["bin_width"], 128);
  for (const char* k : {"dataset", "profile", "candidates", "output"}) EXPECT_TRUE(j["paths"].contains(k));
}

TEST(WriteJson, ByteStable) {
  const auto j = io::to_json(presets::reference_profile(4));
  io::write_json(scratch("a.json"), j);
  io::write_json(scratch("b.json"), j);
  std::ifstream a(scratch("a.json")), b(scratch("b.json"));
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.back(), '\n');
}
