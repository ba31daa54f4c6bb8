// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sequential convex programming planner for the robust collision-avoidance
// problem. The nominal trajectory (r, v, u), the bandwidth alpha and the tube
// (Phi, Omega) are optimized together on a uniform grid: trapezoidal
// collocation for r and v, forward Euler for alpha, Phi and Omega.
//
// Each subproblem linearizes drag, the bilinear alpha*Phi, the uncertainty
// bound and the feedback-control bound about the current iterate, replaces
// obstacle exclusion by supporting half-spaces, and solves the resulting
// SOCP. Nonlinear rows carry L1-penalized slack so every subproblem is
// feasible; steps are screened by a merit function with a trust box and a
// proximal term.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtmpc/scenario.hpp"
#include "dtmpc/socp.hpp"
#include "dtmpc/tube.hpp"

namespace dtmpc {

struct TranscriptionGrid {
  int n_nodes = 57;
  double dt = 0.25;
  double t0 = 0.0;
  double tf = 14.0;

  // Requires (n_nodes - 1) dt == tf - t0 to 1e-9 relative.
  void validate() const;
  double time(int k) const { return t0 + k * dt; }
  static TranscriptionGrid uniform(double t0, double tf, int n_nodes);
};

struct ScpConfig {
  int max_iters = 30;
  Vec3 trust_radius = Vec3(1.0, 1.0, 1.0);  // position, velocity, alpha
  double trust_shrink = 0.5;
  double min_trust = 1e-4;
  double convergence_tol = 1e-2;  // max iterate change
  double defect_tol = 1e-4;       // m/s^2, per node
  double penalty = 1e3;
  double prox_weight = 0.3;
  double prox_alpha_scale = 1.0;  // relative proximal weight on alpha
  // Merit-ratio thresholds: below rho_low the step is damped, above rho_high relaxed.
  double rho_low = 0.25;
  double rho_high = 0.75;
  // Slack left at a stalled iterate above this marks the problem infeasible.
  double infeasible_violation = 1e-3;
  // Accepted nonlinear violation at convergence.
  double violation_tol = 1e-4;
  // After an accepted step changes the cost by less than this fraction, the
  // proximal weight is held at polish_prox or more for the remaining iterations.
  double polish_cost_change = 1e-2;
  double polish_prox = 100.0;
  SocpSettings socp;

  void validate() const;
};

enum class PlanStatus { kConverged, kNotConverged, kInfeasible };
std::string to_string(PlanStatus s);

struct ScpIteration {
  int iter = 0;
  std::string socp_status;
  int socp_iterations = 0;
  double cost = 0.0;
  double violation = 0.0;
  double max_defect = 0.0;
  double merit = 0.0;
  double predicted = 0.0;
  double rho = 0.0;
  double step = 0.0;
  double trust = 0.0;
  double prox = 0.0;
  bool accepted = false;
};

struct PlanResult {
  TranscriptionGrid grid;
  std::vector<Vec3> r_star, v_star, u_star, alpha, v_alpha, phi, omega;
  PlanStatus status = PlanStatus::kNotConverged;
  int iterations = 0;
  double cost = 0.0;
  double violation = 0.0;
  double max_defect = 0.0;        // trapezoid residual / dt, m/s^2
  double tube_mismatch = 0.0;     // re-propagated vs planned Phi, Omega
  double reintegration_error = 0.0;
  std::vector<ScpIteration> history;

  bool converged() const { return status == PlanStatus::kConverged; }
  int size() const { return static_cast<int>(r_star.size()); }
};

// Straight line from r0 to rf at constant velocity, inverse-dynamics u,
// alpha at its lower bound, Phi and Omega propagated from their initial values.
PlanResult straight_line_init(const Scenario& sc, const TranscriptionGrid& grid);

// Affine models about one node of the iterate.
struct NodeLinearization {
  Vec3 drag;           // -cd_hat |v|_eps v
  Mat3 drag_jac;
  Vec3 delta;          // Delta(v*), smoothed
  Mat3 delta_jac;
  Vec3 bilinear;       // alpha o Phi
  Mat3 bilinear_dalpha, bilinear_dphi;
  Vec3 ufb;            // feedback-control bound
  Eigen::Matrix<double, 3, 12> ufb_jac;  // w.r.t. (v, Phi, Omega, alpha)
};
NodeLinearization linearize_node(const Vec3& v, const Vec3& phi, const Vec3& omega,
                                 const Vec3& alpha, const Scenario& sc);

// Smoothing width actually used by the planner.
double planner_eps(const Scenario& sc);

// Nonlinear quantities the planner bounds, shared with the certification.
Vec3 planner_delta(const Vec3& v, const Scenario& sc);
Vec3 planner_ufb(const Vec3& v, const Vec3& phi, const Vec3& omega, const Vec3& alpha,
                 const Scenario& sc);

// a' (H r - center) >= radius with ||a|| = 1.
struct HalfSpace {
  Eigen::VectorXd a;
  double radius = 0.0;
};
// The supporting half-space at r_k; r_k on the axis is nudged 1e-6 toward goal.
HalfSpace convexify_obstacle(const Obstacle& obs, const Vec3& r_k, double tightened_radius,
                             const Vec3& goal);

// Column layout of the subproblem's decision vector.
struct VariableLayout {
  int n_nodes = 0, n_obs = 0;
  int r = 0, v = 0, u = 0, alpha = 0, phi = 0, omega = 0;  // 3 per node
  int w = 0;                                              // 3 per interval
  int nu_pos = 0, nu_neg = 0, nup_pos = 0, nup_neg = 0;   // 3 per interval
  int sv = 0;                                             // 3 per node
  int so = 0;                                             // n_obs per node
  int su = 0, t1 = 0, t2 = 0;                             // 1 per node
  int total = 0;

  VariableLayout(int n_nodes, int n_obs);
  int at(int base, int k, int i = 0, int width = 3) const { return base + width * k + i; }
};

struct ConvexSubproblem {
  ConeProgram program;
  VariableLayout layout;
  Eigen::VectorXd reference;  // the iterate, in layout order
  double prox_weight = 0.0;
};

ConvexSubproblem build_subproblem(const PlanResult& iterate, const Scenario& sc,
                                  const TranscriptionGrid& grid, const ScpConfig& cfg,
                                  const Vec3& trust, double prox_weight);

struct SubproblemSolution {
  SocpResult socp;
  PlanResult candidate;
  double cost = 0.0;   // objective without penalty or prox
  double slack = 0.0;  // penalized slack sum
};
SubproblemSolution solve_subproblem(const ConvexSubproblem& sp, const PlanResult& iterate,
                                    const Scenario& sc, const ScpConfig& cfg);

// Nonlinear cost and L1 constraint violation of an iterate.
struct IterateMerit {
  double cost = 0.0;
  double violation = 0.0;
  double max_defect = 0.0;
};
IterateMerit evaluate_iterate(const PlanResult& it, const Scenario& sc);

PlanResult plan(const Scenario& sc, const TranscriptionGrid& grid, const ScpConfig& cfg = {},
                const std::optional<PlanResult>& initial_guess = std::nullopt);

// Fills max_defect, tube_mismatch and reintegration_error.
void certify(PlanResult& plan, const Scenario& sc);

}  // namespace dtmpc
