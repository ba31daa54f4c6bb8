// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures and independent numerical oracles for the test suites.
// Nothing here calls the code under test to produce an expected value.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>

#include "dtmpc/planner.hpp"
#include "dtmpc/scenario.hpp"

namespace dtmpc::test {

// The reference slalom written out by hand, independent of the YAML loader.
inline Scenario table1() {
  Scenario sc;
  sc.name = "table1";
  sc.model.cd_hat = 0.1;
  sc.model.cd_bar = 0.2;
  sc.model.gravity = Vec3::Zero();
  sc.model.dist_bound = Vec3::Constant(0.5);
  sc.model.eta = 0.1;
  sc.model.kink_eps = 0.05;
  sc.sliding.lambda = Vec3::Constant(2.0);
  sc.bounds = Bounds{0.5, 4.0, 5.0, 2.0, 2.5};
  sc.bc.r0 = Vec3(0, 0, 1);
  sc.bc.v0 = Vec3(0, 1, 0);
  sc.bc.rf = Vec3(0, 25, 1);
  sc.bc.vf = Vec3(0, 1, 0);
  sc.bc.t0 = 0.0;
  sc.bc.tf = 14.0;
  sc.weights.q = 2.0 * Mat3::Identity();
  sc.weights.r = 0.1 * Mat3::Identity();
  sc.weights.r_f = 2.0 * Mat3::Identity();
  sc.alpha0 = 4.0;
  sc.nodes = 57;
  sc.obstacles = {Obstacle::cylinder(-1.5, 3.2, 0.8), Obstacle::cylinder(1.5, 3.2, 0.8),
                  Obstacle::cylinder(0.6, 15.5, 0.7), Obstacle::cylinder(-0.6, 18.5, 0.7),
                  Obstacle::cylinder(0.6, 21.5, 0.7)};
  return sc;
}

inline TranscriptionGrid table1_grid() { return TranscriptionGrid::uniform(0.0, 14.0, 57); }

// Converged slalom plan, computed once per test binary.
inline const PlanResult& table1_plan() {
  static const PlanResult p = plan(table1(), table1_grid());
  return p;
}

// Classical fixed-step RK4 for x' = f(t, x).
template <class V>
V rk4(const std::function<V(double, const V&)>& f, V x, double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  double t = t0;
  for (int i = 0; i < steps; ++i) {
    const V k1 = f(t, x);
    const V k2 = f(t + h / 2, x + (h / 2) * k1);
    const V k3 = f(t + h / 2, x + (h / 2) * k2);
    const V k4 = f(t + h, x + h * k3);
    x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
  }
  return x;
}

// Central-difference Jacobian of f: R^n -> R^m.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (f(xp) - f(xm)) / (2 * h);
  }
  return j;
}

// Max entry-wise error relative to the larger of 1 and the reference scale.
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
  const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
  return (a - ref).cwiseAbs().maxCoeff() / scale;
}

inline Vec3 uniform_vec(std::mt19937_64& g, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec3(u(g), u(g), u(g));
}

// Uniform in the box |x_i| <= b_i.
inline Vec3 in_box(std::mt19937_64& g, const Vec3& b) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Vec3(u(g) * b(0), u(g) * b(1), u(g) * b(2));
}

// Minimum-effort double-integrator transfer on one axis: integral of u^2
// for the cubic matching position and velocity at both ends.
inline double min_effort_cost(double dp, double v0, double v1, double T) {
  return 4.0 * (v0 * v0 + v0 * v1 + v1 * v1) / T - 12.0 * dp * (v0 + v1) / (T * T) +
         12.0 * dp * dp / (T * T * T);
}

}  // namespace dtmpc::test
