// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Boundary-layer sliding controller with time-varying thickness Phi and
// bandwidth alpha. Everything is per output axis.
#pragma once

#include "dtmpc/dynamics.hpp"

namespace dtmpc {

struct SlidingParams {
  Vec3 lambda = Vec3::Constant(2.0);
  // Floor on the switching gain; the unclamped gain can dip below zero when
  // |v| < |v*|.
  double k_min = 0.0;

  void validate() const;
};

struct BoundaryLayer {
  Vec3 phi = Vec3::Ones();
  Vec3 alpha = Vec3::Ones();
};

struct ReferencePoint {
  Vec3 r_star = Vec3::Zero();
  Vec3 v_star = Vec3::Zero();
  Vec3 a_star = Vec3::Zero();
};

Vec3 sliding_variable(const State& x, const ReferencePoint& ref, const SlidingParams& sp);
Vec3 saturate(const Vec3& x);

// Delta(v) - Delta(v*) + alpha Phi, floored at k_min.
Vec3 gain(const State& x, const ReferencePoint& ref, const BoundaryLayer& bl,
          const ModelParams& p, double k_min = 0.0);

// cd_hat |v| v + a* - lambda v~ - K sat(s / Phi) - g
Vec3 ancillary_control(const State& x, const ReferencePoint& ref, const SlidingParams& sp,
                       const BoundaryLayer& bl, const ModelParams& p);

// dPhi/dt = -alpha Phi + Delta(v*) + D + eta
Vec3 boundary_layer_rhs(const BoundaryLayer& bl, const Vec3& v_star, const ModelParams& p);

// d(alpha)/dt = v, |v_i| <= v_max.
Vec3 bandwidth_rhs(const Vec3& v_input, double v_max);

// Thickness that holds dPhi/dt = 0 at constant alpha and v*.
Vec3 steady_state_phi(const Vec3& alpha, const Vec3& v_star, const ModelParams& p);

}  // namespace dtmpc
