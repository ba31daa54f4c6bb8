// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tightening of state, obstacle and actuator constraints by the worst case
// over the tube box |x~| <= bound.
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

#include "dtmpc/sliding.hpp"

namespace dtmpc {

// ||P x + q|| <= c
struct NormConstraint {
  Eigen::MatrixXd p_mat;
  Eigen::VectorXd q_vec;
  double c = 1.0;
};

enum class ObstacleShape { kCylinder, kSphere };

// ||H r - center|| >= radius
struct Obstacle {
  ObstacleShape shape = ObstacleShape::kCylinder;
  Eigen::MatrixXd h_mat;
  Eigen::VectorXd center;
  double radius = 1.0;

  static Obstacle cylinder(double x, double y, double radius);
  static Obstacle sphere(const Vec3& c, double radius);
  double clearance(const Vec3& r) const;
};

class InfeasibleTightening : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// max ||P x|| over the vertices of |x| <= bound.
double worst_case_norm(const Eigen::MatrixXd& p, const Eigen::VectorXd& bound);

NormConstraint tighten_state(const NormConstraint& c, const Eigen::VectorXd& error_bound);
double tighten_obstacle(const Obstacle& obs, const Vec3& omega);
NormConstraint tighten_actuator(const NormConstraint& c, const Vec3& u_fb_bound);

// Element-wise bound on u - u* over every state in the tube box:
//   cd_hat |(|v| v - |v*| v*)_i|  +  lambda_i ve_i  +  max K_i
// with |v - v*| <= ve. Exact box maxima for eps == 0; smoothed and dominating
// for eps > 0. T is double or an Eigen AutoDiff scalar.
template <class T>
Eigen::Matrix<T, 3, 1> feedback_control_bound(const Eigen::Matrix<T, 3, 1>& v_star,
                                              const Eigen::Matrix<T, 3, 1>& vel_err,
                                              const Eigen::Matrix<T, 3, 1>& alpha,
                                              const Eigen::Matrix<T, 3, 1>& phi,
                                              const Vec3& lambda, const ModelParams& p,
                                              double eps, double k_min);

inline Vec3 feedback_control_bound(const ReferencePoint& ref, const Vec3& vel_err,
                                   const BoundaryLayer& bl, const SlidingParams& sp,
                                   const ModelParams& p) {
  return feedback_control_bound<double>(ref.v_star, vel_err, bl.alpha, bl.phi, sp.lambda, p,
                                        p.kink_eps, sp.k_min);
}

template <class T>
Eigen::Matrix<T, 3, 1> feedback_control_bound(const Eigen::Matrix<T, 3, 1>& v_star,
                                              const Eigen::Matrix<T, 3, 1>& vel_err,
                                              const Eigen::Matrix<T, 3, 1>& alpha,
                                              const Eigen::Matrix<T, 3, 1>& phi,
                                              const Vec3& lambda, const ModelParams& p,
                                              double eps, double k_min) {
  using smooth::sabs;
  using smooth::smax;
  using smooth::splus;
  using smooth::splus_under;
  using std::sqrt;
  using V = Eigen::Matrix<T, 3, 1>;

  // Largest and smallest reachable |v_j|.
  V m_hi, m_lo;
  for (int j = 0; j < 3; ++j) {
    m_hi(j) = sabs(v_star(j), eps) + vel_err(j);
    m_lo(j) = splus_under(T(sabs(v_star(j), eps) - eps - vel_err(j)), eps);
  }
  const T n_hi = sqrt(m_hi.squaredNorm() + eps * eps);
  const T n_star = sqrt(v_star.squaredNorm() + eps * eps);
  const V delta_star = smoothed_uncertainty_bound<T>(v_star, p.cd_bar, eps);

  V out;
  for (int i = 0; i < 3; ++i) {
    T rho_hi2 = T(0), rho_lo2 = T(0);
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      rho_hi2 += m_hi(j) * m_hi(j);
      rho_lo2 += m_lo(j) * m_lo(j);
    }
    // |v| v_i is increasing in v_i, so its box extremes sit at v*_i +- ve_i
    // with the other axes pushed out (or in) as far as the sign demands.
    const T hi = v_star(i) + vel_err(i);
    const T lo = v_star(i) - vel_err(i);
    const T hp = splus(hi, eps), hn = splus_under(T(-hi), eps);
    const T lp = splus_under(lo, eps), ln = splus(T(-lo), eps);
    const T f_max = hp * sqrt(hp * hp + rho_hi2) - hn * sqrt(hn * hn + rho_lo2);
    const T f_min = lp * sqrt(lp * lp + rho_lo2) - ln * sqrt(ln * ln + rho_hi2);
    const T c = n_star * v_star(i);
    T drag = smax(T(f_max - c), T(c - f_min), eps);
    if (eps > 0.0) drag += eps * sabs(v_star(i), eps);  // n_star overstates |v*|

    const T a_i = sqrt(m_hi(i) * m_hi(i) + eps * eps);
    T k_bar = p.cd_bar * (n_hi * a_i - eps * eps) - delta_star(i) + alpha(i) * phi(i);
    if (k_bar < T(k_min)) k_bar = T(k_min);

    out(i) = p.cd_hat * drag + lambda(i) * vel_err(i) + k_bar;
  }
  return out;
}

}  // namespace dtmpc
