// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/tube.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace dtmpc {

CanonicalForm canonical_matrices(double lambda, int order) {
  if (order < 2) throw InvalidArgument("canonical_matrices: order must be >= 2");
  if (!(lambda > 0.0)) throw InvalidArgument("canonical_matrices: lambda must be positive");
  const int m = order - 1;
  // Coefficients of (x + lambda)^m, lowest degree first.
  std::vector<double> c(static_cast<size_t>(m) + 1);
  for (int k = 0; k <= m; ++k) {
    double binom = 1.0;
    for (int j = 1; j <= k; ++j) binom = binom * (m - k + j) / j;
    c[static_cast<size_t>(k)] = binom * std::pow(lambda, m - k);
  }
  CanonicalForm f{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m)};
  for (int i = 0; i + 1 < m; ++i) f.a(i, i + 1) = 1.0;
  for (int k = 0; k < m; ++k) f.a(m - 1, k) = -c[static_cast<size_t>(k)];
  f.b(m - 1) = 1.0;
  return f;
}

Vec3 tube_rhs(const Vec3& omega, const Vec3& phi, const Vec3& lambda) {
  return -lambda.cwiseProduct(omega) + phi;
}

Eigen::VectorXd tube_solution_axis(const Eigen::VectorXd& z0, const std::vector<double>& t,
                                   const std::vector<double>& phi, bool zero_order_hold,
                                   double lambda, int order, double t_eval) {
  const CanonicalForm cf = canonical_matrices(lambda, order);
  const int m = order - 1;
  if (z0.size() != m) throw InvalidArgument("tube_solution: z0 has wrong dimension");
  if (t.size() != phi.size() || t.empty())
    throw InvalidArgument("tube_solution: phi trajectory is empty or ragged");
  if (t_eval < t.front() || t_eval > t.back() + 1e-12)
    throw InvalidArgument("tube_solution: t outside the phi trajectory");

  // Augmented state (z, phi, dphi/dt) evolves linearly on each interval.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(m + 2, m + 2);
  aug.topLeftCorner(m, m) = cf.a;
  aug.block(0, m, m, 1) = cf.b;
  aug(m, m + 1) = 1.0;

  Eigen::VectorXd z = z0;
  for (size_t k = 0; k + 1 < t.size() && t[k] < t_eval; ++k) {
    const double h_full = t[k + 1] - t[k];
    const double h = std::min(t_eval, t[k + 1]) - t[k];
    if (h <= 0.0) continue;
    const double slope = zero_order_hold ? 0.0 : (phi[k + 1] - phi[k]) / h_full;
    Eigen::VectorXd x(m + 2);
    x << z, phi[k], slope;
    const Eigen::MatrixXd e = (aug * h).exp();
    z = (e * x).head(m);
  }
  return z;
}

Vec3 tube_solution(const Vec3& omega0, const PhiTrajectory& phi, const Vec3& lambda, double t) {
  Vec3 out;
  std::vector<double> axis(phi.phi.size());
  for (int i = 0; i < 3; ++i) {
    for (size_t k = 0; k < phi.phi.size(); ++k) axis[k] = phi.phi[k](i);
    Eigen::VectorXd z0(1);
    z0(0) = omega0(i);
    out(i) = tube_solution_axis(z0, phi.t, axis, phi.zero_order_hold, lambda(i), 2, t)(0);
  }
  return out;
}

Vec3 velocity_error_bound(const Vec3& omega, const Vec3& phi, const Vec3& lambda) {
  return phi + lambda.cwiseProduct(omega);
}

TubeProfile propagate_tube_grid(const Vec3& phi0, const Vec3& omega0,
                                const std::vector<Vec3>& alpha, const std::vector<Vec3>& v_star,
                                double dt, const ModelParams& p, const Vec3& lambda) {
  const size_t n = alpha.size();
  if (v_star.size() != n || n == 0) throw InvalidArgument("propagate_tube_grid: size mismatch");
  TubeProfile out{std::vector<Vec3>(n), std::vector<Vec3>(n)};
  out.phi[0] = phi0;
  out.omega[0] = omega0;
  for (size_t k = 0; k + 1 < n; ++k) {
    const BoundaryLayer bl{out.phi[k], alpha[k]};
    out.phi[k + 1] = out.phi[k] + dt * boundary_layer_rhs(bl, v_star[k], p);
    out.omega[k + 1] = out.omega[k] + dt * tube_rhs(out.omega[k], out.phi[k], lambda);
  }
  return out;
}

}  // namespace dtmpc
