// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "dtmpc/rng.hpp"
#include "dtmpc/simulation.hpp"
#include "support.hpp"

namespace dtmpc {
namespace {

using test::table1;
using test::table1_plan;

DisturbanceRealization nominal_world(const Scenario& sc) {
  DisturbanceRealization d;
  d.true_cd = sc.model.cd_hat;
  return d;
}

double max_tracking_error(const SimTrace& tr) {
  double e = 0.0;
  for (const SimSample& s : tr.samples)
    e = std::max({e, (s.r - s.r_star).cwiseAbs().maxCoeff(), (s.v - s.v_star).cwiseAbs().maxCoeff()});
  return e;
}

double max_s_ratio(const SimTrace& tr) {
  double m = 0.0;
  for (const SimSample& s : tr.samples)
    m = std::max(m, s.s.cwiseAbs().cwiseQuotient(s.phi).maxCoeff());
  return m;
}

TEST(Rng, SplitmixReferenceValues) {
  // Published outputs of splitmix64 seeded with 0: the generator adds the
  // golden-ratio increment before mixing, so splitmix64(0) is the first draw.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(0x9e3779b97f4a7c15ULL), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, TrialSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(trial_seed(7, i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_EQ(trial_seed(7, 3), trial_seed(7, 3));
  EXPECT_NE(trial_seed(7, 3), trial_seed(8, 3));
}

TEST(Rng, UniformUsesTopBits) {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = uniform01(a);
    EXPECT_EQ(x, static_cast<double>(b() >> 11) * 0x1.0p-53);
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(PlanReference, InterpolatesNodesAndDifferentiatesExactly) {
  const PlanResult& p = table1_plan();
  const PlanReference ref(p);
  for (int k = 0; k < p.size(); ++k) {
    const auto i = static_cast<size_t>(k);
    const PlanReference::Sample s = ref.at(p.grid.time(k));
    EXPECT_LT((s.ref.r_star - p.r_star[i]).norm(), 1e-12);
    EXPECT_LT((s.ref.v_star - p.v_star[i]).norm(), 1e-12);
    EXPECT_LT((s.alpha - p.alpha[i]).norm(), 1e-12);
  }
  // v* and a* are derivatives of the position and velocity interpolants. a*
  // jumps at nodes, so probe interior points only.
  const double h = 1e-5;
  for (int k = 0; k + 1 < p.size(); k += 3) {
    const double t = p.grid.time(k) + 0.37 * p.grid.dt;
    const PlanReference::Sample a = ref.at(t - h), b = ref.at(t + h), c = ref.at(t);
    EXPECT_LT(((b.ref.r_star - a.ref.r_star) / (2 * h) - c.ref.v_star).norm(), 1e-7) << t;
    EXPECT_LT(((b.ref.v_star - a.ref.v_star) / (2 * h) - c.ref.a_star).norm(), 1e-6) << t;
  }
}

TEST(ClosedLoop, ExactModelTracksPerfectly) {
  const Scenario sc = table1();
  const SimTrace tr = integrate_closed_loop(table1_plan(), nominal_world(sc), sc);
  EXPECT_LE(max_tracking_error(tr), 1e-6);
  EXPECT_NEAR(tr.samples.back().t, 14.0, 1e-12);
  for (size_t k = 1; k < tr.samples.size(); ++k) EXPECT_GT(tr.samples[k].t, tr.samples[k - 1].t);
}

TEST(ClosedLoop, RejectsBadStepAndStart) {
  const Scenario sc = table1();
  const PlanResult& p = table1_plan();
  SimOptions o;
  o.step = 0.1;  // > dt/4
  EXPECT_THROW(integrate_closed_loop(p, nominal_world(sc), sc, o), InvalidArgument);
  o.step = 0.03;  // does not divide dt
  EXPECT_THROW(integrate_closed_loop(p, nominal_world(sc), sc, o), InvalidArgument);
  o = SimOptions{};
  State x0{p.r_star[0], p.v_star[0] + Vec3(0, 5, 0)};
  o.x0 = x0;
  EXPECT_THROW(integrate_closed_loop(p, nominal_world(sc), sc, o), InvalidArgument);
  Scenario c = sc;
  c.uncertainty = UncertaintyMode::kConstant;
  EXPECT_THROW(integrate_closed_loop(p, nominal_world(sc), c, SimOptions{}), InvalidArgument);
}

TEST(ClosedLoop, AdmissibleDisturbancesStayInTube) {
  const Scenario sc = table1();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DisturbanceRealization d = sample_disturbance(seed, sc.model, 14.0);
    const SimTrace tr = integrate_closed_loop(table1_plan(), d, sc);
    for (const SimSample& s : tr.samples) {
      const Vec3 rt = (s.r - s.r_star).cwiseAbs();
      const Vec3 vt = (s.v - s.v_star).cwiseAbs();
      const Vec3 vbound = s.phi + sc.sliding.lambda.cwiseProduct(s.omega);
      ASSERT_TRUE((s.s.cwiseAbs().array() <= s.phi.array() + 1e-6).all()) << "seed " << seed << " t " << s.t;
      ASSERT_TRUE((rt.array() <= s.omega.array() + 1e-6).all()) << "seed " << seed << " t " << s.t;
      ASSERT_TRUE((vt.array() <= vbound.array() + 1e-6).all()) << "seed " << seed << " t " << s.t;
    }
  }
}

// A constant worst-case push on one axis drives s toward the layer edge but
// never across it.
TEST(ClosedLoop, WorstCaseConstantDisturbanceApproachesEdge) {
  const Scenario sc = table1();
  DisturbanceRealization d;
  d.true_cd = sc.model.cd_bar;
  d.hold_dt = 0.1;
  d.samples.assign(141, Vec3(sc.model.dist_bound(0), 0, 0));
  const SimTrace tr = integrate_closed_loop(table1_plan(), d, sc);
  double m = 0.0;
  for (const SimSample& s : tr.samples) m = std::max(m, std::abs(s.s(0)) / s.phi(0));
  EXPECT_LE(m, 1.0 + 1e-6);
  EXPECT_GT(m, 0.5);
}

TEST(ClosedLoop, HalvingTheStepBarelyMovesTheSlidingVariable) {
  const Scenario sc = table1();
  const DisturbanceRealization d = sample_disturbance(3, sc.model, 14.0);
  SimOptions a, b;
  a.step = 0.005;
  b.step = 0.0025;
  b.record_stride = 2;
  const SimTrace ta = integrate_closed_loop(table1_plan(), d, sc, a);
  const SimTrace tb = integrate_closed_loop(table1_plan(), d, sc, b);
  double ma = 0.0, mb = 0.0;
  for (const SimSample& s : ta.samples) ma = std::max(ma, s.s.cwiseAbs().maxCoeff());
  for (const SimSample& s : tb.samples) mb = std::max(mb, s.s.cwiseAbs().maxCoeff());
  EXPECT_LT(std::abs(ma - mb), 1e-5);
}

TEST(ClosedLoop, ContainmentMonotoneInDisturbanceScale) {
  const Scenario sc = table1();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double full = max_s_ratio(
        integrate_closed_loop(table1_plan(), sample_disturbance(seed, sc.model, 14.0), sc));
    for (double kappa : {0.0, 0.25, 0.5, 0.75}) {
      const double part = max_s_ratio(integrate_closed_loop(
          table1_plan(), sample_disturbance(seed, sc.model, 14.0, 0.1, kappa), sc));
      EXPECT_LE(part, full + 1e-9) << "seed " << seed << " kappa " << kappa;
    }
  }
}

TEST(ClosedLoop, Deterministic) {
  const Scenario sc = table1();
  const DisturbanceRealization d = sample_disturbance(11, sc.model, 14.0);
  const SimTrace a = integrate_closed_loop(table1_plan(), d, sc);
  const SimTrace b = integrate_closed_loop(table1_plan(), d, sc);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (size_t k = 0; k < a.samples.size(); ++k) {
    ASSERT_EQ(a.samples[k].r, b.samples[k].r);
    ASSERT_EQ(a.samples[k].u, b.samples[k].u);
  }
}

TEST(SampleDisturbance, BoundedCoveringAndScaled) {
  const Scenario sc = table1();
  const DisturbanceRealization d = sample_disturbance(5, sc.model, 14.0);
  EXPECT_GE(d.samples.size() * d.hold_dt, 14.0);
  EXPECT_NO_THROW(d.validate(sc.model));
  const DisturbanceRealization d3 = sample_disturbance(5, sc.model, 14.0, 0.1, 3.0);
  ASSERT_EQ(d.samples.size(), d3.samples.size());
  EXPECT_EQ(d.true_cd, d3.true_cd);
  double peak = 0.0;
  for (size_t k = 0; k < d.samples.size(); ++k) {
    EXPECT_LT((3.0 * d.samples[k] - d3.samples[k]).norm(), 1e-15);
    peak = std::max(peak, d3.samples[k].cwiseAbs().maxCoeff());
  }
  EXPECT_GT(peak, 0.5);
  EXPECT_THROW(d3.validate(sc.model), InvalidArgument);
}

TEST(SampleDisturbance, RoughlyUniform) {
  ModelParams p;
  double sum = 0.0, sq = 0.0, cd = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const DisturbanceRealization d = sample_disturbance(seed, p, 10.0);
    cd += d.true_cd;
    for (const Vec3& s : d.samples)
      for (int i = 0; i < 3; ++i, ++n) {
        sum += s(i);
        sq += s(i) * s(i);
      }
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 0.25 / 3.0, 0.003);  // variance of U[-D, D]
  EXPECT_NEAR(cd / 200, 0.1, 0.01);
}

TEST(ParallelFor, CoversEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, 4, [&](int i) { hits[static_cast<size_t>(i)]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(100, 3, [](int i) {
                 if (i == 57) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts) {
  const Scenario sc = table1();
  MonteCarloConfig c;
  c.trials = 24;
  c.threads = 1;
  const MonteCarloReport a = monte_carlo(table1_plan(), sc, c);
  c.threads = 4;
  const MonteCarloReport b = monte_carlo(table1_plan(), sc, c);
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].seed, b.trials[i].seed);
    EXPECT_EQ(a.trials[i].max_s_ratio, b.trials[i].max_s_ratio);
    EXPECT_EQ(a.trials[i].min_clearance, b.trials[i].min_clearance);
  }
  EXPECT_EQ(a.max_excess, b.max_excess);
  EXPECT_EQ(a.violations, 0);
  EXPECT_LE(a.violations, a.n_trials);
}

TEST(MonteCarlo, KeepsThinnedTraces) {
  const Scenario sc = table1();
  MonteCarloConfig c;
  c.trials = 3;
  c.keep_traces = true;
  c.trace_stride = 20;
  const MonteCarloReport r = monte_carlo(table1_plan(), sc, c);
  ASSERT_EQ(r.traces.size(), 3u);
  EXPECT_EQ(r.traces[0].samples.size(), 2800u / 20 + 1);
}

TEST(MonteCarlo, InflatedDisturbanceBreaksContainment) {
  const Scenario sc = table1();
  MonteCarloConfig c;
  c.trials = 50;
  c.disturbance_scale = 3.0;
  const MonteCarloReport r = monte_carlo(table1_plan(), sc, c);
  EXPECT_GT(r.violations, 0);
  EXPECT_GT(r.max_excess, 0.0);
}

// With zero tracking error the applied control is the interval mean of the
// nodal feedforward (trapezoid collocation), so the simulated effort matches
// the midpoint quadrature of u* rather than the nodal trapezoid.
TEST(Metrics, OnReferenceEffortMatchesPlanQuadrature) {
  const Scenario sc = table1();
  const PlanResult& p = table1_plan();
  const SimTrace tr = integrate_closed_loop(p, nominal_world(sc), sc);
  const SimMetrics m = compute_metrics(tr, p, sc);
  EXPECT_LT(m.max_s_ratio, 1e-6);
  EXPECT_LT(m.max_r_ratio, 1e-6);
  double trap = 0.0, gap = 0.0;
  const Mat3& q = sc.weights.q;
  for (int k = 0; k + 1 < p.size(); ++k) {
    const Vec3& a = p.u_star[static_cast<size_t>(k)];
    const Vec3& b = p.u_star[static_cast<size_t>(k) + 1];
    trap += 0.5 * p.grid.dt * (a.dot(q * a) + b.dot(q * b));
    gap += 0.25 * p.grid.dt * (a - b).dot(q * (a - b));
  }
  EXPECT_NEAR(m.plan_effort, trap, 1e-9 * trap);
  EXPECT_NEAR(m.control_effort / (trap - gap), 1.0, 0.01);
  EXPECT_NEAR(m.control_effort / m.plan_effort, 1.0, 0.05);
}

PlanResult two_node_plan() {
  PlanResult p;
  p.grid = TranscriptionGrid{3, 1.0, 0.0, 2.0};
  p.r_star = {Vec3(0, 0, 0), Vec3(0, 5, 0), Vec3(0, 10, 0)};
  p.v_star = {Vec3(0, 1, 0), Vec3(0, 2, 0), Vec3(0, 3, 0)};
  p.alpha = {Vec3::Constant(1), Vec3::Constant(2), Vec3::Constant(4)};
  return p;
}

TEST(Metrics, ProximitySplit) {
  Scenario sc = table1();
  sc.obstacles = {Obstacle::cylinder(0.5, 0.0, 0.2), Obstacle::cylinder(10, 10, 0.5)};
  const PlanResult p = two_node_plan();
  const PlanProximity px = plan_proximity(p, sc);
  // Node 0 is 0.3 m from the first cylinder, nodes 1 and 2 are over 3 m away
  // from both, except node 2 which is exactly 9.5 m from the second.
  EXPECT_EQ(px.n_near, 1);
  EXPECT_EQ(px.n_far, 2);
  EXPECT_DOUBLE_EQ(px.mean_alpha_near, 1.0);
  EXPECT_DOUBLE_EQ(px.mean_alpha_far, 3.0);
  EXPECT_DOUBLE_EQ(px.mean_speed_near, 1.0);
  EXPECT_DOUBLE_EQ(px.mean_speed_far, 2.5);
}

TEST(Metrics, MinClearance) {
  EXPECT_TRUE(std::isinf(min_clearance(Vec3::Zero(), {})));
  const std::vector<Obstacle> obs = {Obstacle::cylinder(3, 4, 1), Obstacle::sphere(Vec3(0, 0, 10), 2)};
  EXPECT_DOUBLE_EQ(min_clearance(Vec3(0, 0, 0), obs), 4.0);
  EXPECT_DOUBLE_EQ(min_clearance(Vec3(0, 0, 7), obs), 1.0);
}

TEST(RecedingHorizon, FullVisibilityMatchesSinglePlan) {
  Scenario sc = table1();
  sc.visibility_radius = 1e3;
  const RhcResult r = receding_horizon_run(sc, ScpConfig{});
  ASSERT_FALSE(r.plans.empty());
  EXPECT_EQ(r.known_obstacles.front(), 5);
  EXPECT_NEAR(r.plans.front().cost, table1_plan().cost, 1e-6 * table1_plan().cost);
  EXPECT_TRUE(r.reached_goal);
  EXPECT_FALSE(r.penetrated);
}

Scenario rhc_layout() {
  Scenario sc = table1();
  sc.name = "rhc_layout";
  sc.obstacles = {Obstacle::cylinder(-1.5, 3.2, 0.8), Obstacle::cylinder(1.5, 3.2, 0.8),
                  Obstacle::cylinder(0.6, 17.5, 0.7), Obstacle::cylinder(-0.6, 20.0, 0.7),
                  Obstacle::cylinder(0.6, 22.5, 0.7)};
  return sc;
}

TEST(RecedingHorizon, DiscoversObstaclesAndStaysSafe) {
  const Scenario sc = rhc_layout();
  const RhcResult r = receding_horizon_run(sc, ScpConfig{});
  ASSERT_EQ(r.plans.size(), r.replan_times.size());
  EXPECT_GE(r.plans.size(), 3u);
  EXPECT_TRUE(r.reached_goal);
  EXPECT_FALSE(r.penetrated);
  EXPECT_GE(r.min_clearance, 0.0);
  // Reveals happen in flight, not all at the start.
  EXPECT_LT(r.known_obstacles.front(), 5);
  EXPECT_EQ(r.known_obstacles.back(), 5);
  for (size_t i = 1; i < r.known_obstacles.size(); ++i)
    EXPECT_GE(r.known_obstacles[i], r.known_obstacles[i - 1]);
  // Each executed segment clears every obstacle its plan knew about.
  for (const SimSample& s : r.trace.samples) {
    size_t active = 0;
    while (active + 1 < r.replan_times.size() && r.replan_times[active + 1] <= s.t) ++active;
    const std::vector<Obstacle> known(sc.obstacles.begin(),
                                      sc.obstacles.begin() + r.known_obstacles[active]);
    ASSERT_GE(min_clearance(s.r, known), 0.0) << "t " << s.t;
  }
}

// Seed 38 once ended a replan as infeasible while its violation was still
// shrinking tenfold per iteration on short polish steps.
TEST(RecedingHorizon, ShortRestorationStepsAreNotAStall) {
  RhcConfig rc;
  rc.seed = 38;
  const RhcResult r = receding_horizon_run(rhc_layout(), ScpConfig{}, rc);
  EXPECT_TRUE(r.reached_goal);
  EXPECT_FALSE(r.penetrated);
}

// Once the slalom appears, the new plan raises the bandwidth where it passes
// the newly known cylinders compared with the plan that did not know them.
TEST(RecedingHorizon, RevealRaisesBandwidthNearNewObstacles) {
  const Scenario sc = rhc_layout();
  const RhcResult r = receding_horizon_run(sc, ScpConfig{});
  size_t reveal = 0;
  for (size_t i = 1; i < r.plans.size(); ++i)
    if (r.known_obstacles[i] > r.known_obstacles[i - 1]) {
      reveal = i;
      break;
    }
  ASSERT_GT(reveal, 0u);
  const std::vector<Obstacle> fresh(sc.obstacles.begin() + r.known_obstacles[reveal - 1],
                                    sc.obstacles.begin() + r.known_obstacles[reveal]);
  const PlanResult& before = r.plans[reveal - 1];
  const PlanResult& after = r.plans[reveal];
  const PlanReference ref_before(before);
  double a_after = 0.0, a_before = 0.0;
  int n = 0;
  for (int k = 0; k < after.size(); ++k) {
    const auto i = static_cast<size_t>(k);
    if (min_clearance(after.r_star[i], fresh) >= kNearClearance) continue;
    const double t = after.grid.time(k);
    if (t > ref_before.tf()) continue;
    a_after += after.alpha[i].mean();
    a_before += ref_before.at(t).alpha.mean();
    ++n;
  }
  ASSERT_GT(n, 0);
  EXPECT_GT(a_after / n, a_before / n);
}

}  // namespace
}  // namespace dtmpc
