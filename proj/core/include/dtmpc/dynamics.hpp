// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Point mass with quadratic drag: r'' = -Cd |v| v + g + u + d.
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "dtmpc/smooth.hpp"

namespace dtmpc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Fixed smoothing for drag Jacobians; simulation uses the raw model.
inline constexpr double kDragEps = 1e-6;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct State {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct ModelParams {
  double cd_hat = 0.1;
  double cd_bar = 0.2;
  Vec3 gravity = Vec3::Zero();
  Vec3 dist_bound = Vec3::Constant(0.5);
  double eta = 0.1;
  // Smoothing width for |v_i| inside the uncertainty bound. Zero is exact.
  double kink_eps = 0.0;

  void validate() const;
};

// Piecewise-constant disturbance, sample k active on [k*hold_dt, (k+1)*hold_dt).
struct DisturbanceRealization {
  double hold_dt = 0.1;
  std::vector<Vec3> samples;
  double true_cd = 0.0;

  Vec3 at(double t) const;
  void validate(const ModelParams& p) const;
};

Vec3 nominal_accel(const State& s, const Vec3& u, const ModelParams& p);
Vec3 true_accel(const State& s, const Vec3& u, const ModelParams& p, const Vec3& d, double cd);

// cd_bar |v| |v_i| per axis.
Vec3 uncertainty_bound(const Vec3& v, const ModelParams& p);

// -cd_hat |v|_eps v and its Jacobian, |v|_eps = sqrt(|v|^2 + eps^2).
Vec3 smoothed_drag(const Vec3& v, const ModelParams& p, double eps);
Mat3 drag_jacobian(const Vec3& v, const ModelParams& p, double eps);

// cd_bar (|v|_e |v_i|_e - e^2). Dominates uncertainty_bound, vanishes at rest,
// and equals it exactly for e == 0.
template <class T>
Eigen::Matrix<T, 3, 1> smoothed_uncertainty_bound(const Eigen::Matrix<T, 3, 1>& v,
                                                  double cd_bar, double e) {
  using std::sqrt;
  const T nv = sqrt(v.squaredNorm() + e * e);
  Eigen::Matrix<T, 3, 1> out;
  for (int i = 0; i < 3; ++i) out(i) = cd_bar * (nv * smooth::sabs(v(i), e) - e * e);
  return out;
}

inline Vec3 smoothed_uncertainty_bound(const Vec3& v, const ModelParams& p) {
  return smoothed_uncertainty_bound<double>(v, p.cd_bar, p.kink_eps);
}

// Requires e > 0 or v with no zero component.
Mat3 uncertainty_jacobian(const Vec3& v, double cd_bar, double e);

}  // namespace dtmpc
