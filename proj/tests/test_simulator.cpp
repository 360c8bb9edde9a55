// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "hydra/presets.hpp"
#include "hydra/simulator.hpp"
#include "hydra/workload.hpp"
#include "oracles.hpp"

using namespace hydra;

TEST(OneFOneB, OrderShape) {
  using P = std::pair<int, bool>;
  EXPECT_EQ(one_f_one_b_order(3, 0, 3),
            (std::vector<P>{{0, true}, {1, true}, {2, true}, {0, false}, {1, false}, {2, false}}));
  EXPECT_EQ(one_f_one_b_order(3, 2, 2), (std::vector<P>{{0, true}, {0, false}, {1, true}, {1, false}}));
  EXPECT_EQ(one_f_one_b_order(4, 0, 1), (std::vector<P>{{0, true}, {0, false}}));
}

TEST(SimulatePipeline, EqualTimesExact) {
  // forward = T/3 and backward = 2T/3 are exact for T = 3 and T = 1.5.
  for (double T : {3.0, 1.5, 6.0})
    for (int pp = 1; pp <= 8; ++pp)
      for (int v = 1; v <= 16; ++v) {
        const auto sim = simulate_pipeline(std::vector<Seconds>(static_cast<std::size_t>(v), T), pp);
        EXPECT_EQ(sim.latency, (pp - 1 + v) * T) << "pp=" << pp << " v=" << v << " T=" << T;
      }
}

TEST(SimulatePipeline, EqualTimesOtherForwardFraction) {
  SimConfig cfg;
  cfg.forward_fraction = 0.25;
  for (int pp = 1; pp <= 8; ++pp)
    for (int v = 1; v <= 16; ++v)
      EXPECT_EQ(simulate_pipeline(std::vector<Seconds>(static_cast<std::size_t>(v), 4.0), pp, cfg).latency,
                (pp - 1 + v) * 4.0);
}

TEST(SimulatePipeline, UnequalMatchesScheduleOracle) {
  Rng rng(17);
  for (int pp = 1; pp <= 3; ++pp)
    for (int v = 1; v <= 4; ++v)
      for (int rep = 0; rep < 25; ++rep) {
        std::vector<Seconds> times(static_cast<std::size_t>(v));
        for (auto& t : times) t = 3.0 * static_cast<double>(1 + rng.below(20));
        const auto sim = simulate_pipeline(times, pp);
        EXPECT_EQ(sim.latency, oracle::longest_schedule_path(times, pp, 1.0 / 3.0)) << "pp=" << pp << " v=" << v;
      }
}

TEST(SimulatePipeline, TimelineRespectsDependencies) {
  const std::vector<Seconds> times{9, 3, 12, 6, 3};
  const int pp = 4;
  const auto sim = simulate_pipeline(times, pp);
  ASSERT_EQ(sim.timeline.size(), static_cast<std::size_t>(2 * pp) * times.size());
  std::map<std::tuple<int, int, bool>, ScheduleOp> at;
  for (const auto& op : sim.timeline) at[{op.stage, op.microbatch, op.forward}] = op;
  auto end_of = [&](int s, int j, bool f) { return at[std::make_tuple(s, j, f)].end; };
  for (const auto& op : sim.timeline) {
    if (op.forward && op.stage > 0) {
      EXPECT_GE(op.start, end_of(op.stage - 1, op.microbatch, true));
    }
    if (!op.forward && op.stage < pp - 1) {
      EXPECT_GE(op.start, end_of(op.stage + 1, op.microbatch, false));
    }
    if (!op.forward && op.stage == pp - 1) {
      EXPECT_GE(op.start, end_of(op.stage, op.microbatch, true));
    }
  }
  // No two ops overlap on a stage.
  for (int s = 0; s < pp; ++s) {
    std::vector<std::pair<Seconds, Seconds>> iv;
    for (const auto& op : sim.timeline)
      if (op.stage == s) iv.push_back({op.start, op.end});
    std::sort(iv.begin(), iv.end());
    for (std::size_t k = 1; k < iv.size(); ++k) EXPECT_GE(iv[k].first, iv[k - 1].second);
  }
}

TEST(SimulatePipeline, FloorsOnLatency) {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const int pp = 1 + static_cast<int>(rng.below(6));
    std::vector<Seconds> times(1 + rng.below(10));
    for (auto& t : times) t = 0.5 + rng.uniform() * 10;
    const auto sim = simulate_pipeline(times, pp);
    double sum = 0, mx = 0;
    for (double t : times) {
      sum += t;
      mx = std::max(mx, t);
    }
    EXPECT_GE(sim.latency, sum * (1 - 1e-12));
    EXPECT_GE(sim.latency, pp * mx * (1 - 1e-12));
    EXPECT_GE(sim.bubble_fraction, 0);
    EXPECT_LT(sim.bubble_fraction, 1);
  }
}

TEST(SimulatePipeline, BadInput) {
  EXPECT_THROW(simulate_pipeline({}, 2), InvalidArgument);
  EXPECT_THROW(simulate_pipeline({1}, 0), InvalidArgument);
  SimConfig cfg;
  cfg.forward_fraction = 1;
  EXPECT_THROW(simulate_pipeline({1}, 1, cfg), InvalidArgument);
}

TEST(AssembleIteration, OverlapModes) {
  CommSeconds c;
  c.pull_network = 2;
  c.push_network = 3;
  c.pull_local = 0.5;
  EXPECT_EQ(assemble_iteration(10, c, OverlapMode::kNone), 15.5);
  EXPECT_EQ(assemble_iteration(10, c, OverlapMode::kFull), 10.5);
  EXPECT_EQ(assemble_iteration(4, c, OverlapMode::kFull), 5.5);
}

TEST(SimulateStrategy, EstimateAgreesForSingleMicrobatch) {
  const auto p = presets::reference_profile(8);
  const std::vector<Tokens> mb{4000, 3000, 2000, 1000};
  const auto plan = plan_strategy(mb, parse_strategy("1x2x1*4"), p);
  const auto rep = simulate_strategy(plan, nullptr, nullptr, 0, p);
  for (const auto& pr : rep.per_pipeline) {
    if (pr.microbatch_times.size() == 1) {
      EXPECT_NEAR(pr.simulated, pr.estimated, 1e-12 * pr.estimated);
    }
    EXPECT_GE(pr.simulated, 0);
  }
  EXPECT_EQ(rep.iteration_latency, rep.propagation);
}

TEST(SimulateStrategy, CommPlansMustMatch) {
  const auto p = presets::reference_profile(8);
  const auto plan = plan_strategy({1000}, parse_strategy("2x1x1*4"), p);
  const auto pull = pull_plan(parse_strategy("1x1x1*8"), 8, 32);
  const auto push = push_plan(parse_strategy("1x1x1*8"), 8, 32);
  EXPECT_THROW(simulate_strategy(plan, &pull, &push, 1e9, p), InvalidArgument);
}

TEST(MaxLenBaseline, PlanAudits) {
  const auto p = presets::reference_profile(16);
  const auto corpus = synth_longtail(LogNormal{6.9, 1.2}, 20000, 32768, 4);
  const auto mb = sample_minibatch(corpus, 100000, 32768, 2).lengths;
  const auto s = parse_strategy("1x1x4*4");
  const auto plan = plan_maxlen_roundrobin(mb, s, p, 32768);
  EXPECT_TRUE(audit_plan(plan, mb, p).empty());
  for (const auto& pk : plan.packings)
    for (const auto& m : pk.per_microbatch) EXPECT_LE(m.tokens, 32768);
  EXPECT_THROW(plan_maxlen_roundrobin(mb, parse_strategy("1x1x4*2+1x1x1*8"), p, 32768), InvalidArgument);
}

TEST(ComparePolicies, StructureAndDeterminism) {
  const auto p = presets::reference_profile(8);
  const auto corpus = synth_longtail(LogNormal{6.9, 1.2}, 20000, 16384, 4);
  std::vector<std::vector<Tokens>> mbs;
  for (std::uint64_t it = 0; it < 6; ++it) mbs.push_back(sample_minibatch(corpus, 50000, 16384, it).lengths);
  CompareOptions o;
  o.context_length = 16384;
  const std::vector<Strategy> cands{parse_strategy("2x1x1*1+1x1x1*6"), parse_strategy("1x1x2*4")};
  const auto a = compare_policies(mbs, cands, p, o);
  const auto b = compare_policies(mbs, cands, p, o);
  ASSERT_EQ(a.rows.size(), 4u);
  EXPECT_EQ(a.dynamic_choices.size(), mbs.size());
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(a.rows[r].latencies.size(), mbs.size());
    EXPECT_EQ(a.rows[r].latencies, b.rows[r].latencies);
    EXPECT_GT(a.rows[r].mean, 0);
  }
  EXPECT_EQ(a.rows[0].strategy, a.rows[1].strategy);
  EXPECT_DOUBLE_EQ(a.speedup[0][0], 1.0);
  EXPECT_DOUBLE_EQ(a.speedup[0][3], a.rows[0].mean / a.rows[3].mean);
}
