// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/tightening.hpp"

#include <cmath>

namespace dtmpc {

Obstacle Obstacle::cylinder(double x, double y, double radius) {
  Obstacle o;
  o.shape = ObstacleShape::kCylinder;
  o.h_mat = Eigen::MatrixXd::Zero(2, 3);
  o.h_mat(0, 0) = 1.0;
  o.h_mat(1, 1) = 1.0;
  o.center = Eigen::Vector2d(x, y);
  o.radius = radius;
  return o;
}

Obstacle Obstacle::sphere(const Vec3& c, double radius) {
  Obstacle o;
  o.shape = ObstacleShape::kSphere;
  o.h_mat = Eigen::MatrixXd::Identity(3, 3);
  o.center = c;
  o.radius = radius;
  return o;
}

double Obstacle::clearance(const Vec3& r) const { return (h_mat * r - center).norm() - radius; }

double worst_case_norm(const Eigen::MatrixXd& p, const Eigen::VectorXd& bound) {
  const auto n = bound.size();
  if (p.cols() != n) throw InvalidArgument("worst_case_norm: dimension mismatch");
  if (n > 16) throw InvalidArgument("worst_case_norm: box dimension too large for enumeration");
  // x -> -x leaves the norm unchanged, so fix the sign of the first coordinate.
  double best = 0.0;
  const unsigned count = n > 0 ? 1u << (n - 1) : 1u;
  Eigen::VectorXd x(n);
  for (unsigned mask = 0; mask < count; ++mask) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool neg = j > 0 && ((mask >> (j - 1)) & 1u);
      x(j) = neg ? -bound(j) : bound(j);
    }
    best = std::max(best, (p * x).norm());
  }
  return best;
}

NormConstraint tighten_state(const NormConstraint& c, const Eigen::VectorXd& error_bound) {
  NormConstraint out = c;
  out.c = c.c - worst_case_norm(c.p_mat, error_bound);
  if (!(out.c > 0.0)) throw InfeasibleTightening("tighten_state: tightened bound is non-positive");
  return out;
}

double tighten_obstacle(const Obstacle& obs, const Vec3& omega) {
  return obs.radius + worst_case_norm(obs.h_mat, omega);
}

NormConstraint tighten_actuator(const NormConstraint& c, const Vec3& u_fb_bound) {
  // The feedback term can sit anywhere in the box |u_fb| <= u_fb_bound; for
  // P = I this is just the norm of the bound.
  NormConstraint out = c;
  out.c = c.c - worst_case_norm(c.p_mat, u_fb_bound);
  if (!(out.c > 0.0))
    throw InfeasibleTightening("tighten_actuator: tightened bound is non-positive");
  return out;
}

}  // namespace dtmpc
