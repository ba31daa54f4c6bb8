// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tube geometry driven by the boundary layer: (d/dt + lambda)^(n-1) x~ = s with
// |s| <= Phi bounds |x~| by the solution Omega of the same linear system.
#pragma once

#include <Eigen/Core>
#include <vector>

#include "dtmpc/sliding.hpp"

namespace dtmpc {

struct TubeEnvelope {
  Vec3 omega = Vec3::Zero();
  Vec3 phi_ref = Vec3::Zero();
};

// Controllable canonical form of (d/dt + lambda)^(order-1) x~ = s.
struct CanonicalForm {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};
CanonicalForm canonical_matrices(double lambda, int order);

// Order-2 model: dOmega/dt = -lambda Omega + Phi.
Vec3 tube_rhs(const Vec3& omega, const Vec3& phi, const Vec3& lambda);

// Phi sampled at increasing times; linear between samples unless zero_order_hold.
struct PhiTrajectory {
  std::vector<double> t;
  std::vector<Vec3> phi;
  bool zero_order_hold = false;
};

// Variation-of-constants solution at time t, integrating the kernel exactly
// against the interpolated Phi on each sample interval.
Vec3 tube_solution(const Vec3& omega0, const PhiTrajectory& phi, const Vec3& lambda, double t);

// Same for a single axis of arbitrary order; z0 has order-1 entries.
Eigen::VectorXd tube_solution_axis(const Eigen::VectorXd& z0, const std::vector<double>& t,
                                   const std::vector<double>& phi, bool zero_order_hold,
                                   double lambda, int order, double t_eval);

// |v~| <= |s| + lambda |r~| <= Phi + lambda Omega
Vec3 velocity_error_bound(const Vec3& omega, const Vec3& phi, const Vec3& lambda);

// Forward-Euler recursion of Phi and Omega on a uniform grid, the
// discretization the planner enforces. alpha and v_star have one entry per node.
struct TubeProfile {
  std::vector<Vec3> phi;
  std::vector<Vec3> omega;
};
TubeProfile propagate_tube_grid(const Vec3& phi0, const Vec3& omega0,
                                const std::vector<Vec3>& alpha, const std::vector<Vec3>& v_star,
                                double dt, const ModelParams& p, const Vec3& lambda);

}  // namespace dtmpc
