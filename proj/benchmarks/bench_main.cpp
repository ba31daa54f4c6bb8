// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Timing for the hot paths: one convex subproblem, a full slalom plan, one
// closed-loop trial and the analytic tube solution.

#include <benchmark/benchmark.h>

#include "dtmpc/planner.hpp"
#include "dtmpc/simulation.hpp"
#include "dtmpc/tube.hpp"

namespace dtmpc {
namespace {

Scenario slalom() {
  Scenario sc;
  sc.name = "bench";
  sc.model.kink_eps = 0.05;
  sc.obstacles = {Obstacle::cylinder(-1.5, 3.2, 0.8), Obstacle::cylinder(1.5, 3.2, 0.8),
                  Obstacle::cylinder(0.6, 15.5, 0.7), Obstacle::cylinder(-0.6, 18.5, 0.7),
                  Obstacle::cylinder(0.6, 21.5, 0.7)};
  return sc;
}

TranscriptionGrid grid() { return TranscriptionGrid::uniform(0.0, 14.0, 57); }

const PlanResult& slalom_plan() {
  static const PlanResult p = plan(slalom(), grid());
  return p;
}

void BM_FirstSubproblem(benchmark::State& state) {
  const Scenario sc = slalom();
  const ScpConfig cfg;
  const PlanResult guess = straight_line_init(sc, grid());
  const ConvexSubproblem sp = build_subproblem(guess, sc, grid(), cfg, cfg.trust_radius, cfg.prox_weight);
  for (auto _ : state) benchmark::DoNotOptimize(solve_subproblem(sp, guess, sc, cfg));
}
BENCHMARK(BM_FirstSubproblem)->Unit(benchmark::kMillisecond);

void BM_PlanSlalom(benchmark::State& state) {
  const Scenario sc = slalom();
  for (auto _ : state) benchmark::DoNotOptimize(plan(sc, grid()));
}
BENCHMARK(BM_PlanSlalom)->Unit(benchmark::kMillisecond);

void BM_ClosedLoopTrial(benchmark::State& state) {
  const Scenario sc = slalom();
  const PlanResult& p = slalom_plan();
  const DisturbanceRealization d = sample_disturbance(1, sc.model, sc.bc.tf);
  for (auto _ : state) benchmark::DoNotOptimize(integrate_closed_loop(p, d, sc));
}
BENCHMARK(BM_ClosedLoopTrial)->Unit(benchmark::kMillisecond);

void BM_TubeSolution(benchmark::State& state) {
  const PlanResult& p = slalom_plan();
  PhiTrajectory traj;
  for (int k = 0; k < p.size(); ++k) traj.t.push_back(p.grid.time(k));
  traj.phi = p.phi;
  const Vec3 lam = Vec3::Constant(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(tube_solution(Vec3::Zero(), traj, lam, 13.9));
}
BENCHMARK(BM_TubeSolution);

}  // namespace
}  // namespace dtmpc

BENCHMARK_MAIN();
