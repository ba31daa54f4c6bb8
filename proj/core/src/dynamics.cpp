// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/dynamics.hpp"

#include <cmath>
#include <string>

namespace dtmpc {

void ModelParams::validate() const {
  if (!(cd_hat >= 0.0) || !(cd_bar >= cd_hat))
    throw InvalidArgument("model: require 0 <= cd_hat <= cd_bar");
  if (!(dist_bound.array() >= 0.0).all() || !dist_bound.allFinite())
    throw InvalidArgument("model: dist_bound must be finite and non-negative");
  if (!(eta > 0.0)) throw InvalidArgument("model: eta must be positive");
  if (!gravity.allFinite()) throw InvalidArgument("model: gravity must be finite");
  if (!(kink_eps >= 0.0)) throw InvalidArgument("model: kink_eps must be non-negative");
}

Vec3 DisturbanceRealization::at(double t) const {
  if (samples.empty()) return Vec3::Zero();
  auto k = static_cast<long>(std::floor(t / hold_dt + 1e-9));
  if (k < 0) k = 0;
  if (k >= static_cast<long>(samples.size())) k = static_cast<long>(samples.size()) - 1;
  return samples[static_cast<size_t>(k)];
}

void DisturbanceRealization::validate(const ModelParams& p) const {
  if (!(hold_dt > 0.0)) throw InvalidArgument("disturbance: hold_dt must be positive");
  if (!(true_cd >= 0.0 && true_cd <= p.cd_bar))
    throw InvalidArgument("disturbance: true_cd outside [0, cd_bar]");
  for (const Vec3& d : samples)
    if (!(d.array().abs() <= p.dist_bound.array()).all())
      throw InvalidArgument("disturbance: sample exceeds dist_bound");
}

Vec3 nominal_accel(const State& s, const Vec3& u, const ModelParams& p) {
  return -p.cd_hat * s.v.norm() * s.v + p.gravity + u;
}

Vec3 true_accel(const State& s, const Vec3& u, const ModelParams& p, const Vec3& d, double cd) {
  if (!(cd >= 0.0 && cd <= p.cd_bar)) throw InvalidArgument("true_accel: cd outside [0, cd_bar]");
  if (!(d.array().abs() <= p.dist_bound.array()).all())
    throw InvalidArgument("true_accel: disturbance exceeds dist_bound");
  return -cd * s.v.norm() * s.v + p.gravity + u + d;
}

Vec3 uncertainty_bound(const Vec3& v, const ModelParams& p) {
  return p.cd_bar * v.norm() * v.cwiseAbs();
}

Vec3 smoothed_drag(const Vec3& v, const ModelParams& p, double eps) {
  return -p.cd_hat * std::sqrt(v.squaredNorm() + eps * eps) * v;
}

Mat3 drag_jacobian(const Vec3& v, const ModelParams& p, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("drag_jacobian: eps must be positive");
  const double n = std::sqrt(v.squaredNorm() + eps * eps);
  return -p.cd_hat * (n * Mat3::Identity() + v * v.transpose() / n);
}

Mat3 uncertainty_jacobian(const Vec3& v, double cd_bar, double e) {
  const double nv = std::sqrt(v.squaredNorm() + e * e);
  Mat3 J;
  for (int i = 0; i < 3; ++i) {
    const double ai = std::sqrt(v(i) * v(i) + e * e);
    for (int j = 0; j < 3; ++j) {
      J(i, j) = cd_bar * (v(j) / nv) * ai;
      if (i == j) J(i, j) += cd_bar * nv * v(i) / ai;
    }
  }
  return J;
}

}  // namespace dtmpc
