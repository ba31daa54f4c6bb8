// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/sliding.hpp"

namespace dtmpc {

void SlidingParams::validate() const {
  if (!(lambda.array() > 0.0).all()) throw InvalidArgument("sliding: lambda must be positive");
  if (!(k_min >= 0.0)) throw InvalidArgument("sliding: k_min must be non-negative");
}

Vec3 sliding_variable(const State& x, const ReferencePoint& ref, const SlidingParams& sp) {
  return (x.v - ref.v_star) + sp.lambda.cwiseProduct(x.r - ref.r_star);
}

Vec3 saturate(const Vec3& x) { return x.cwiseMax(-1.0).cwiseMin(1.0); }

Vec3 gain(const State& x, const ReferencePoint& ref, const BoundaryLayer& bl,
          const ModelParams& p, double k_min) {
  const Vec3 k = smoothed_uncertainty_bound(x.v, p) - smoothed_uncertainty_bound(ref.v_star, p) +
                 bl.alpha.cwiseProduct(bl.phi);
  return k.cwiseMax(k_min);
}

Vec3 ancillary_control(const State& x, const ReferencePoint& ref, const SlidingParams& sp,
                       const BoundaryLayer& bl, const ModelParams& p) {
  const Vec3 s = sliding_variable(x, ref, sp);
  const Vec3 k = gain(x, ref, bl, p, sp.k_min);
  return p.cd_hat * x.v.norm() * x.v + ref.a_star - sp.lambda.cwiseProduct(x.v - ref.v_star) -
         k.cwiseProduct(saturate(s.cwiseQuotient(bl.phi))) - p.gravity;
}

Vec3 boundary_layer_rhs(const BoundaryLayer& bl, const Vec3& v_star, const ModelParams& p) {
  return -bl.alpha.cwiseProduct(bl.phi) + smoothed_uncertainty_bound(v_star, p) + p.dist_bound +
         Vec3::Constant(p.eta);
}

Vec3 bandwidth_rhs(const Vec3& v_input, double v_max) {
  if (!(v_input.array().abs() <= v_max).all())
    throw InvalidArgument("bandwidth_rhs: |v| exceeds v_max");
  return v_input;
}

Vec3 steady_state_phi(const Vec3& alpha, const Vec3& v_star, const ModelParams& p) {
  return (smoothed_uncertainty_bound(v_star, p) + p.dist_bound + Vec3::Constant(p.eta))
      .cwiseQuotient(alpha);
}

}  // namespace dtmpc
