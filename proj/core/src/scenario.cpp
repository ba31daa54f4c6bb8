// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/scenario.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dtmpc {

namespace {
void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument(field + ": " + what);
}
bool finite(const Vec3& v) { return v.allFinite(); }
}  // namespace

void Scenario::validate() const {
  model.validate();
  sliding.validate();
  require(bounds.alpha_min > 0.0, "bounds.alpha_min", "must be positive");
  require(bounds.alpha_max > bounds.alpha_min, "bounds.alpha_max", "must exceed alpha_min");
  require(bounds.u_max > 0.0, "bounds.u_max", "must be positive");
  require(bounds.v_alpha_max >= 0.0, "bounds.v_alpha_max", "must be non-negative");
  require(bounds.speed_max > 0.0, "bounds.speed_max", "must be positive");
  require(finite(bc.r0) && finite(bc.v0) && finite(bc.rf) && finite(bc.vf), "boundary",
          "vectors must be finite");
  require(std::isfinite(bc.t0) && bc.tf > bc.t0, "boundary.tf", "must exceed t0");
  require((bc.v0.array().abs() <= bounds.speed_max).all(), "boundary.v0",
          "exceeds bounds.speed_max");
  require((bc.vf.array().abs() <= bounds.speed_max).all(), "boundary.vf",
          "exceeds bounds.speed_max");
  require(weights.q.allFinite() && weights.r.allFinite() && weights.r_f.allFinite(), "weights",
          "must be finite");
  require((weights.q - weights.q.transpose()).norm() < 1e-12 &&
              weights.q.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() >= 0.0,
          "weights.q", "must be symmetric positive semidefinite");
  require((weights.r - weights.r.transpose()).norm() < 1e-12 &&
              weights.r.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() >= 0.0,
          "weights.r", "must be symmetric positive semidefinite");
  for (size_t i = 0; i < obstacles.size(); ++i) {
    const Obstacle& o = obstacles[i];
    const std::string f = "obstacles[" + std::to_string(i) + "]";
    require(o.radius > 0.0 && std::isfinite(o.radius), f + ".radius", "must be positive");
    require(o.h_mat.cols() == 3 && o.h_mat.rows() == o.center.size(), f + ".center",
            "dimension does not match the shape");
    require(o.center.allFinite(), f + ".center", "must be finite");
  }
  require(alpha0 >= bounds.alpha_min && alpha0 <= bounds.alpha_max, "tube.alpha0",
          "must lie in [alpha_min, alpha_max]");
  if (phi0) require(finite(*phi0) && (phi0->array() > 0.0).all(), "tube.phi0", "must be positive");
  require(finite(omega0) && (omega0.array() >= 0.0).all(), "tube.omega0", "must be non-negative");
  require(constant_delta >= 0.0, "uncertainty.constant_delta", "must be non-negative");
  require(nodes >= 10, "grid.nodes", "must be at least 10");
  require(visibility_radius > 0.0, "rhc.visibility_radius", "must be positive");
  require(replan_period > 0.0, "rhc.replan_period", "must be positive");
  require(trials >= 1, "montecarlo.trials", "must be at least 1");
}

Vec3 Scenario::initial_phi() const {
  if (phi0) return *phi0;
  Vec3 delta = smoothed_uncertainty_bound(bc.v0, model);
  if (uncertainty == UncertaintyMode::kConstant) delta.setConstant(constant_delta);
  return (delta + model.dist_bound + Vec3::Constant(model.eta)) / alpha0;
}

}  // namespace dtmpc
