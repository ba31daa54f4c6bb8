// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-loop simulation of the true plant under the boundary-layer
// controller, Monte Carlo invariance campaigns and receding-horizon runs.
//
// The controller integrates its own Phi and Omega alongside the plant, driven
// by the interpolated bandwidth and reference velocity. Containment is judged
// against those online values.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtmpc/planner.hpp"

namespace dtmpc {

// Continuous reference built from a plan. r* is the cubic Hermite interpolant
// of the nodal (r*, v*); v* and a* are its exact derivatives, so a perfect
// model tracks it with zero error. alpha, u*, and the planned Phi and Omega
// are linear between nodes.
class PlanReference {
 public:
  explicit PlanReference(const PlanResult& plan);

  struct Sample {
    ReferencePoint ref;
    Vec3 alpha, u_star, phi_plan, omega_plan;
  };
  // `segment` selects the interval so callers can evaluate a node time from
  // either side; -1 picks the interval containing t.
  Sample at(double t, int segment = -1) const;

  double t0() const { return t0_; }
  double tf() const { return t0_ + dt_ * (n_ - 1); }
  double dt() const { return dt_; }
  int segments() const { return n_ - 1; }

 private:
  std::vector<Vec3> r_, v_, u_, alpha_, phi_, omega_;
  double t0_, dt_;
  int n_;
};

struct SimSample {
  double t = 0.0;
  Vec3 r, v, r_star, v_star, u, s, phi, alpha, omega;
  // |s_i| <= Phi_i and |r~_i| <= Omega_i, both to 1e-6 relative.
  std::array<bool, 3> s_contained{}, r_contained{};
};

struct SimTrace {
  double step = 0.0;
  std::vector<SimSample> samples;
};

inline constexpr double kContainmentTol = 1e-6;

struct SimOptions {
  double step = 0.005;
  std::optional<State> x0;  // defaults to the plan's first node
  int record_stride = 1;    // keep every n-th step; first and last are always kept
};

// Integrates from the plan's first to last node. Requires step <= dt/4 with
// dt/step an integer, and |s(t0)| <= Phi(t0). Omega starts at
// max(plan Omega0, |r~(t0)|). Disturbance samples are not checked against the
// design bound so over-bound campaigns can be run. Constant-uncertainty
// scenarios are planner-only and rejected here.
SimTrace integrate_closed_loop(const PlanResult& plan, const DisturbanceRealization& dist,
                               const Scenario& sc, const SimOptions& opt = {});

// Independent uniform samples on [-scale D, scale D] held for hold_dt each,
// covering [0, duration], and true_cd uniform on [0, cd_bar]. Scaling keeps
// the draws, so runs at different scales share a realization.
DisturbanceRealization sample_disturbance(std::uint64_t seed, const ModelParams& p,
                                          double duration, double hold_dt = 0.1,
                                          double scale = 1.0);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  double true_cd = 0.0;
  double max_s_ratio = 0.0;  // max over t, axes of |s_i| / Phi_i
  double max_r_ratio = 0.0;  // max over t, axes of |r~_i| / Omega_i (Omega > 0)
  double min_clearance = 0.0;
  bool violated = false;
};

struct MonteCarloConfig {
  int trials = 1000;
  std::uint64_t seed = 7;
  double step = 0.005;
  double disturbance_scale = 1.0;
  int threads = 0;  // 0: hardware concurrency
  bool keep_traces = false;
  int trace_stride = 10;
};

struct MonteCarloReport {
  int n_trials = 0;
  int violations = 0;
  double max_excess = 0.0;  // max over trials of max_t (|s|/Phi - 1)
  double min_clearance = 0.0;
  std::vector<TrialResult> trials;
  std::vector<SimTrace> traces;  // filled when keep_traces
};

MonteCarloReport monte_carlo(const PlanResult& plan, const Scenario& sc,
                             const MonteCarloConfig& cfg);

// Runs fn(i) for i in [0, n) on a pool of workers. fn must only touch state
// owned by index i. The first exception thrown is rethrown after the pool joins.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

class PlanFailed : public std::runtime_error {
 public:
  PlanFailed(const std::string& what, PlanResult failed)
      : std::runtime_error(what), plan(std::move(failed)) {}
  PlanResult plan;
};

struct RhcConfig {
  double step = 0.005;
  std::uint64_t seed = 7;
  double disturbance_scale = 1.0;
  int min_replan_nodes = 10;  // no replan once fewer nodes remain
  double goal_tolerance = 0.5;
  int record_stride = 1;
};

struct RhcResult {
  SimTrace trace;
  std::vector<PlanResult> plans;
  std::vector<double> replan_times;
  std::vector<int> known_obstacles;  // count known at each plan
  bool reached_goal = false;
  double min_clearance = 0.0;  // true trajectory vs every obstacle
  bool penetrated = false;
};

// Obstacles are revealed when their clearance from the true position is
// within sc.visibility_radius, checked at each replan instant. Each replan
// starts from the true state (so r~ = 0 and Omega0 = 0) with Phi0 taken from
// the controller, on the remaining nodes of the original grid, warm-started
// from the previous plan. Throws PlanFailed if any plan does not converge.
RhcResult receding_horizon_run(const Scenario& sc, const ScpConfig& cfg,
                               const RhcConfig& rhc = {});

struct SimMetrics {
  double max_s_ratio = 0.0;
  double max_r_ratio = 0.0;
  double min_clearance = 0.0;
  double control_effort = 0.0;  // trapezoid integral of u' Q u over the samples
  double plan_effort = 0.0;     // the same over the plan's nodes with u*
  double mean_alpha_near = 0.0, mean_alpha_far = 0.0;
  int n_near = 0, n_far = 0;
};

// Proximity split: clearance < 1 m is near, > 3 m is far. The node alpha
// scalar is the mean over axes.
inline constexpr double kNearClearance = 1.0;
inline constexpr double kFarClearance = 3.0;

SimMetrics compute_metrics(const SimTrace& trace, const PlanResult& plan, const Scenario& sc);

// The same proximity split over the plan's nodes.
struct PlanProximity {
  double mean_alpha_near = 0.0, mean_alpha_far = 0.0;
  double mean_speed_near = 0.0, mean_speed_far = 0.0;
  int n_near = 0, n_far = 0;
};
PlanProximity plan_proximity(const PlanResult& plan, const Scenario& sc);

// Smallest clearance of r from any obstacle; +inf with none.
double min_clearance(const Vec3& r, const std::vector<Obstacle>& obstacles);

}  // namespace dtmpc
