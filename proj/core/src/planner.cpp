// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/planner.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>

namespace dtmpc {

namespace {

using Triplet = Eigen::Triplet<double>;

// Rows of a sparse block with their right-hand sides.
struct Rows {
  std::vector<Triplet> t;
  std::vector<double> rhs;
  int n = 0;

  int add(double b) {
    rhs.push_back(b);
    return n++;
  }
  void set(int row, int col, double v) {
    if (v != 0.0) t.emplace_back(row, col, v);
  }
};

// Trapezoid quadrature weight of node k.
double quad_weight(int k, const TranscriptionGrid& g) {
  return (k == 0 || k == g.n_nodes - 1) ? 0.5 * g.dt : g.dt;
}

double stage_cost(const Vec3& u, const Vec3& alpha, const Scenario& sc) {
  const Vec3 at = alpha - Vec3::Constant(sc.bounds.alpha_min);
  return u.dot(sc.weights.q * u) + at.dot(sc.weights.r * at);
}

Vec3 drag_at(const Vec3& v, const Scenario& sc) { return smoothed_drag(v, sc.model, kDragEps); }

bool constant_mode(const Scenario& sc) { return sc.uncertainty == UncertaintyMode::kConstant; }

ModelParams feedback_model(const Scenario& sc) {
  ModelParams p = sc.model;
  // With a constant bound the gain difference Delta(v) - Delta(v*) vanishes.
  if (constant_mode(sc)) p.cd_bar = 0.0;
  return p;
}

}  // namespace

void TranscriptionGrid::validate() const {
  if (n_nodes < 10) throw InvalidArgument("grid: n_nodes must be at least 10");
  if (!(dt > 0.0)) throw InvalidArgument("grid: dt must be positive");
  if (!(tf > t0)) throw InvalidArgument("grid: tf must exceed t0");
  const double span = (n_nodes - 1) * dt;
  if (std::abs(span - (tf - t0)) > 1e-9 * std::max(1.0, tf - t0))
    throw InvalidArgument("grid: (n_nodes - 1) * dt must equal tf - t0");
}

TranscriptionGrid TranscriptionGrid::uniform(double t0, double tf, int n_nodes) {
  TranscriptionGrid g;
  g.n_nodes = n_nodes;
  g.t0 = t0;
  g.tf = tf;
  g.dt = (tf - t0) / (n_nodes - 1);
  g.validate();
  return g;
}

void ScpConfig::validate() const {
  if (max_iters < 1) throw InvalidArgument("scp: max_iters must be at least 1");
  if (!(trust_radius.array() > 0.0).all()) throw InvalidArgument("scp: trust radii must be positive");
  if (!(trust_shrink > 0.0 && trust_shrink < 1.0))
    throw InvalidArgument("scp: trust_shrink must lie in (0, 1)");
  if (!(convergence_tol > 0.0 && defect_tol > 0.0 && violation_tol > 0.0))
    throw InvalidArgument("scp: tolerances must be positive");
  if (!(penalty > 0.0) || !(prox_weight >= 0.0))
    throw InvalidArgument("scp: penalty must be positive and prox_weight non-negative");
  if (!(polish_cost_change >= 0.0 && polish_prox >= 0.0))
    throw InvalidArgument("scp: polish settings must be non-negative");
}

std::string to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::kConverged: return "converged";
    case PlanStatus::kNotConverged: return "not_converged";
    case PlanStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

double planner_eps(const Scenario& sc) { return std::max(sc.model.kink_eps, kDragEps); }

Vec3 planner_delta(const Vec3& v, const Scenario& sc) {
  if (constant_mode(sc)) return Vec3::Constant(sc.constant_delta);
  return smoothed_uncertainty_bound<double>(v, sc.model.cd_bar, planner_eps(sc));
}

Vec3 planner_ufb(const Vec3& v, const Vec3& phi, const Vec3& omega, const Vec3& alpha,
                 const Scenario& sc) {
  const Vec3 ve = velocity_error_bound(omega, phi, sc.sliding.lambda);
  return feedback_control_bound<double>(v, ve, alpha, phi, sc.sliding.lambda, feedback_model(sc),
                                        planner_eps(sc), sc.sliding.k_min);
}

PlanResult straight_line_init(const Scenario& sc, const TranscriptionGrid& grid) {
  grid.validate();
  const int n = grid.n_nodes;
  PlanResult out;
  out.grid = grid;
  const Vec3 vel = (sc.bc.rf - sc.bc.r0) / (grid.tf - grid.t0);
  const Vec3 alpha = Vec3::Constant(sc.bounds.alpha_min);
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    out.r_star.push_back(sc.bc.r0 + s * (sc.bc.rf - sc.bc.r0));
    out.v_star.push_back(vel);
    out.u_star.push_back(-drag_at(vel, sc) - sc.model.gravity);
    out.alpha.push_back(alpha);
    out.v_alpha.push_back(Vec3::Zero());
  }
  out.phi.assign(static_cast<size_t>(n), sc.initial_phi());
  out.omega.assign(static_cast<size_t>(n), sc.omega0);
  for (int k = 0; k + 1 < n; ++k) {
    const auto i = static_cast<size_t>(k);
    out.phi[i + 1] = out.phi[i] + grid.dt * (-alpha.cwiseProduct(out.phi[i]) +
                                             planner_delta(out.v_star[i], sc) +
                                             sc.model.dist_bound + Vec3::Constant(sc.model.eta));
    out.omega[i + 1] =
        out.omega[i] + grid.dt * tube_rhs(out.omega[i], out.phi[i], sc.sliding.lambda);
  }
  return out;
}

NodeLinearization linearize_node(const Vec3& v, const Vec3& phi, const Vec3& omega,
                                 const Vec3& alpha, const Scenario& sc) {
  NodeLinearization L;
  L.drag = drag_at(v, sc);
  L.drag_jac = drag_jacobian(v, sc.model, kDragEps);
  L.delta = planner_delta(v, sc);
  L.delta_jac = constant_mode(sc) ? Mat3::Zero()
                                  : uncertainty_jacobian(v, sc.model.cd_bar, planner_eps(sc));
  L.bilinear = alpha.cwiseProduct(phi);
  L.bilinear_dalpha = phi.asDiagonal();
  L.bilinear_dphi = alpha.asDiagonal();

  using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, 12, 1>>;
  using AdVec = Eigen::Matrix<Ad, 3, 1>;
  AdVec av, ap, ao, aa, ve;
  for (int i = 0; i < 3; ++i) {
    av(i) = Ad(v(i), 12, i);
    ap(i) = Ad(phi(i), 12, 3 + i);
    ao(i) = Ad(omega(i), 12, 6 + i);
    aa(i) = Ad(alpha(i), 12, 9 + i);
  }
  for (int i = 0; i < 3; ++i) ve(i) = ap(i) + sc.sliding.lambda(i) * ao(i);
  const AdVec f = feedback_control_bound<Ad>(av, ve, aa, ap, sc.sliding.lambda, feedback_model(sc),
                                             planner_eps(sc), sc.sliding.k_min);
  for (int i = 0; i < 3; ++i) {
    L.ufb(i) = f(i).value();
    L.ufb_jac.row(i) = f(i).derivatives().transpose();
  }
  return L;
}

HalfSpace convexify_obstacle(const Obstacle& obs, const Vec3& r_k, double tightened_radius,
                             const Vec3& goal) {
  Eigen::VectorXd d = obs.h_mat * r_k - obs.center;
  if (d.norm() < 1e-12) {
    Vec3 dir = goal - r_k;
    dir = dir.norm() > 0.0 ? Vec3(dir.normalized()) : Vec3::UnitX();
    d = obs.h_mat * (r_k + 1e-6 * dir) - obs.center;
    if (d.norm() < 1e-15) d = Eigen::VectorXd::Unit(obs.center.size(), 0);
  }
  return HalfSpace{d.normalized(), tightened_radius};
}

VariableLayout::VariableLayout(int n, int no) : n_nodes(n), n_obs(no) {
  int c = 0;
  auto take = [&c](int count) {
    const int start = c;
    c += count;
    return start;
  };
  r = take(3 * n);
  v = take(3 * n);
  u = take(3 * n);
  alpha = take(3 * n);
  phi = take(3 * n);
  omega = take(3 * n);
  w = take(3 * (n - 1));
  nu_pos = take(3 * (n - 1));
  nu_neg = take(3 * (n - 1));
  nup_pos = take(3 * (n - 1));
  nup_neg = take(3 * (n - 1));
  sv = take(3 * n);
  so = take(no * n);
  su = take(n);
  t1 = take(n);
  t2 = take(n);
  total = c;
}

ConvexSubproblem build_subproblem(const PlanResult& it, const Scenario& sc,
                                  const TranscriptionGrid& grid, const ScpConfig& cfg,
                                  const Vec3& trust, double prox_weight) {
  const int n = grid.n_nodes;
  if (it.size() != n || static_cast<int>(it.phi.size()) != n ||
      static_cast<int>(it.omega.size()) != n || static_cast<int>(it.alpha.size()) != n ||
      static_cast<int>(it.u_star.size()) != n || static_cast<int>(it.v_star.size()) != n)
    throw InvalidArgument("build_subproblem: iterate does not match the grid");
  const int no = static_cast<int>(sc.obstacles.size());
  const VariableLayout L(n, no);
  const double dt = grid.dt;
  const Vec3& lam = sc.sliding.lambda;
  const double pen = cfg.penalty;

  std::vector<NodeLinearization> lin;
  lin.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    lin.push_back(linearize_node(it.v_star[i], it.phi[i], it.omega[i], it.alpha[i], sc));
  }

  ConvexSubproblem sp{ConeProgram{}, L, Eigen::VectorXd::Zero(L.total), prox_weight};
  Eigen::VectorXd& ref = sp.reference;
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    ref.segment<3>(L.at(L.r, k)) = it.r_star[i];
    ref.segment<3>(L.at(L.v, k)) = it.v_star[i];
    ref.segment<3>(L.at(L.u, k)) = it.u_star[i];
    ref.segment<3>(L.at(L.alpha, k)) = it.alpha[i];
    ref.segment<3>(L.at(L.phi, k)) = it.phi[i];
    ref.segment<3>(L.at(L.omega, k)) = it.omega[i];
  }

  // Objective.
  std::vector<Triplet> pt;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(L.total);
  const Vec3 amin = Vec3::Constant(sc.bounds.alpha_min);
  for (int k = 0; k < n; ++k) {
    const double wk = quad_weight(k, grid);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        pt.emplace_back(L.at(L.u, k, a), L.at(L.u, k, b), 2.0 * wk * sc.weights.q(a, b));
        pt.emplace_back(L.at(L.alpha, k, a), L.at(L.alpha, k, b), 2.0 * wk * sc.weights.r(a, b));
      }
    c.segment<3>(L.at(L.alpha, k)) -= 2.0 * wk * sc.weights.r * amin;
    if (prox_weight > 0.0) {
      const std::pair<int, double> groups[3] = {
          {L.r, 1.0}, {L.v, 1.0}, {L.alpha, cfg.prox_alpha_scale}};
      for (const auto& [base, scale] : groups)
        for (int a = 0; a < 3; ++a) {
          const int col = L.at(base, k, a);
          const double wgt = 2.0 * prox_weight * scale * dt;
          pt.emplace_back(col, col, wgt);
          c(col) -= wgt * ref(col);
        }
    }
  }
  for (int col = L.nu_pos; col < L.total; ++col)
    if (col < L.t1) c(col) = pen;  // every slack column sits in [nu_pos, t1)

  Rows eq, lin_rows, soc;
  std::vector<int> soc_dims;

  auto fix3 = [&](int base, int k, const Vec3& val) {
    for (int a = 0; a < 3; ++a) eq.set(eq.add(val(a)), L.at(base, k, a), 1.0);
  };
  fix3(L.r, 0, sc.bc.r0);
  fix3(L.v, 0, sc.bc.v0);
  fix3(L.r, n - 1, sc.bc.rf);
  fix3(L.v, n - 1, sc.bc.vf);
  fix3(L.phi, 0, sc.initial_phi());
  fix3(L.omega, 0, sc.omega0);

  const Vec3 dist = sc.model.dist_bound + Vec3::Constant(sc.model.eta);
  for (int k = 0; k + 1 < n; ++k) {
    const NodeLinearization& l0 = lin[static_cast<size_t>(k)];
    const NodeLinearization& l1 = lin[static_cast<size_t>(k) + 1];
    const Vec3& v0 = it.v_star[static_cast<size_t>(k)];
    const Vec3& v1 = it.v_star[static_cast<size_t>(k) + 1];
    const Vec3 aff0 = l0.drag - l0.drag_jac * v0 + sc.model.gravity;
    const Vec3 aff1 = l1.drag - l1.drag_jac * v1 + sc.model.gravity;
    const Vec3& ab = it.alpha[static_cast<size_t>(k)];
    const Vec3& pb = it.phi[static_cast<size_t>(k)];
    for (int a = 0; a < 3; ++a) {
      // r_{k+1} = r_k + dt/2 (v_k + v_{k+1})
      int row = eq.add(0.0);
      eq.set(row, L.at(L.r, k + 1, a), 1.0);
      eq.set(row, L.at(L.r, k, a), -1.0);
      eq.set(row, L.at(L.v, k, a), -0.5 * dt);
      eq.set(row, L.at(L.v, k + 1, a), -0.5 * dt);

      // v_{k+1} = v_k + dt/2 (f_k + f_{k+1}) + nu
      row = eq.add(0.5 * dt * (aff0(a) + aff1(a)));
      eq.set(row, L.at(L.v, k + 1, a), 1.0);
      eq.set(row, L.at(L.v, k, a), -1.0);
      for (int b = 0; b < 3; ++b) {
        eq.set(row, L.at(L.v, k, b), -0.5 * dt * l0.drag_jac(a, b));
        eq.set(row, L.at(L.v, k + 1, b), -0.5 * dt * l1.drag_jac(a, b));
      }
      eq.set(row, L.at(L.u, k, a), -0.5 * dt);
      eq.set(row, L.at(L.u, k + 1, a), -0.5 * dt);
      eq.set(row, L.at(L.nu_pos, k, a), -1.0);
      eq.set(row, L.at(L.nu_neg, k, a), 1.0);

      // alpha_{k+1} = alpha_k + dt w_k
      row = eq.add(0.0);
      eq.set(row, L.at(L.alpha, k + 1, a), 1.0);
      eq.set(row, L.at(L.alpha, k, a), -1.0);
      eq.set(row, L.at(L.w, k, a), -dt);

      // Omega_{k+1} = Omega_k + dt (-lambda Omega_k + Phi_k)
      row = eq.add(0.0);
      eq.set(row, L.at(L.omega, k + 1, a), 1.0);
      eq.set(row, L.at(L.omega, k, a), -(1.0 - dt * lam(a)));
      eq.set(row, L.at(L.phi, k, a), -dt);

      // Phi_{k+1} = Phi_k + dt (-[alpha Phi]_lin + Delta_lin + D + eta) + nu_phi
      row = eq.add(dt * (ab(a) * pb(a) + l0.delta(a) - l0.delta_jac.row(a).dot(v0) + dist(a)));
      eq.set(row, L.at(L.phi, k + 1, a), 1.0);
      eq.set(row, L.at(L.phi, k, a), -(1.0 - dt * ab(a)));
      eq.set(row, L.at(L.alpha, k, a), dt * pb(a));
      for (int b = 0; b < 3; ++b) eq.set(row, L.at(L.v, k, b), -dt * l0.delta_jac(a, b));
      eq.set(row, L.at(L.nup_pos, k, a), -1.0);
      eq.set(row, L.at(L.nup_neg, k, a), 1.0);

      if (sc.bounds.v_alpha_max == 0.0) {
        eq.set(eq.add(0.0), L.at(L.w, k, a), 1.0);
      } else {
        lin_rows.set(lin_rows.add(sc.bounds.v_alpha_max), L.at(L.w, k, a), 1.0);
        lin_rows.set(lin_rows.add(sc.bounds.v_alpha_max), L.at(L.w, k, a), -1.0);
      }
    }
  }

  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    for (int a = 0; a < 3; ++a) {
      lin_rows.set(lin_rows.add(sc.bounds.alpha_max), L.at(L.alpha, k, a), 1.0);
      lin_rows.set(lin_rows.add(-sc.bounds.alpha_min), L.at(L.alpha, k, a), -1.0);
      // Trust box; boundary-fixed r and v are excluded.
      lin_rows.set(lin_rows.add(trust(2) + it.alpha[i](a)), L.at(L.alpha, k, a), 1.0);
      lin_rows.set(lin_rows.add(trust(2) - it.alpha[i](a)), L.at(L.alpha, k, a), -1.0);
      if (k > 0 && k < n - 1) {
        lin_rows.set(lin_rows.add(trust(0) + it.r_star[i](a)), L.at(L.r, k, a), 1.0);
        lin_rows.set(lin_rows.add(trust(0) - it.r_star[i](a)), L.at(L.r, k, a), -1.0);
        lin_rows.set(lin_rows.add(trust(1) + it.v_star[i](a)), L.at(L.v, k, a), 1.0);
        lin_rows.set(lin_rows.add(trust(1) - it.v_star[i](a)), L.at(L.v, k, a), -1.0);
      }
      // Tightened speed: |v_i| + Phi_i + lambda_i Omega_i <= speed_max + slack.
      if (k > 0) {
        for (double sgn : {1.0, -1.0}) {
          const int row = lin_rows.add(sc.bounds.speed_max);
          lin_rows.set(row, L.at(L.v, k, a), sgn);
          lin_rows.set(row, L.at(L.phi, k, a), 1.0);
          lin_rows.set(row, L.at(L.omega, k, a), lam(a));
          lin_rows.set(row, L.at(L.sv, k, a), -1.0);
        }
      }
    }
    // ||u|| + ||u_fb|| <= u_max + slack
    const int row = lin_rows.add(sc.bounds.u_max);
    lin_rows.set(row, L.t1 + k, 1.0);
    lin_rows.set(row, L.t2 + k, 1.0);
    lin_rows.set(row, L.su + k, -1.0);
  }
  for (int col = L.nu_pos; col < L.t1; ++col) lin_rows.set(lin_rows.add(0.0), col, -1.0);

  // Obstacles: a'(H r - p) - r_o + slack >= || |H| Omega ||.
  for (int k = 1; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    for (int j = 0; j < no; ++j) {
      const Obstacle& ob = sc.obstacles[static_cast<size_t>(j)];
      const HalfSpace hs = convexify_obstacle(ob, it.r_star[i], ob.radius, sc.bc.rf);
      const Eigen::RowVectorXd ah = hs.a.transpose() * ob.h_mat;
      const int row0 = soc.add(-hs.a.dot(ob.center) - ob.radius);
      for (int b = 0; b < 3; ++b) soc.set(row0, L.at(L.r, k, b), -ah(b));
      soc.set(row0, L.so + no * k + j, -1.0);
      const Eigen::MatrixXd habs = ob.h_mat.cwiseAbs();
      for (int m = 0; m < habs.rows(); ++m) {
        const int row = soc.add(0.0);
        for (int b = 0; b < 3; ++b) soc.set(row, L.at(L.omega, k, b), -habs(m, b));
      }
      soc_dims.push_back(1 + static_cast<int>(habs.rows()));
    }
  }
  // Actuator cones: ||u|| <= t1, ||u_fb linearized|| <= t2.
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    soc.set(soc.add(0.0), L.t1 + k, -1.0);
    for (int a = 0; a < 3; ++a) soc.set(soc.add(0.0), L.at(L.u, k, a), -1.0);
    soc_dims.push_back(4);

    const NodeLinearization& l = lin[i];
    Eigen::Matrix<double, 12, 1> z0;
    z0 << it.v_star[i], it.phi[i], it.omega[i], it.alpha[i];
    const Vec3 off = l.ufb - l.ufb_jac * z0;
    soc.set(soc.add(0.0), L.t2 + k, -1.0);
    const int bases[4] = {L.v, L.phi, L.omega, L.alpha};
    for (int a = 0; a < 3; ++a) {
      const int row = soc.add(off(a));
      for (int blk = 0; blk < 4; ++blk)
        for (int b = 0; b < 3; ++b) soc.set(row, L.at(bases[blk], k, b), -l.ufb_jac(a, 3 * blk + b));
    }
    soc_dims.push_back(4);
  }

  ConeProgram& pr = sp.program;
  pr.p.resize(L.total, L.total);
  pr.p.setFromTriplets(pt.begin(), pt.end());
  pr.c = c;
  pr.a.resize(eq.n, L.total);
  pr.a.setFromTriplets(eq.t.begin(), eq.t.end());
  pr.b = Eigen::Map<const Eigen::VectorXd>(eq.rhs.data(), eq.n);
  for (const Triplet& t : soc.t) lin_rows.t.emplace_back(lin_rows.n + t.row(), t.col(), t.value());
  pr.g.resize(lin_rows.n + soc.n, L.total);
  pr.g.setFromTriplets(lin_rows.t.begin(), lin_rows.t.end());
  pr.h.resize(lin_rows.n + soc.n);
  pr.h << Eigen::Map<const Eigen::VectorXd>(lin_rows.rhs.data(), lin_rows.n),
      Eigen::Map<const Eigen::VectorXd>(soc.rhs.data(), soc.n);
  pr.n_linear = lin_rows.n;
  pr.soc_dims = std::move(soc_dims);
  return sp;
}

SubproblemSolution solve_subproblem(const ConvexSubproblem& sp, const PlanResult& iterate,
                                    const Scenario& sc, const ScpConfig& cfg) {
  SubproblemSolution out;
  out.socp = solve_socp(sp.program, cfg.socp);
  const Eigen::VectorXd& x = out.socp.x;
  const VariableLayout& L = sp.layout;
  PlanResult& cand = out.candidate;
  cand.grid = iterate.grid;
  if (x.size() != L.total) return out;
  const int n = L.n_nodes;
  auto get = [&](int base, int k) { return Vec3(x.segment<3>(base + 3 * k)); };
  for (int k = 0; k < n; ++k) {
    cand.r_star.push_back(get(L.r, k));
    cand.v_star.push_back(get(L.v, k));
    cand.u_star.push_back(get(L.u, k));
    cand.alpha.push_back(get(L.alpha, k));
    cand.phi.push_back(get(L.phi, k));
    cand.omega.push_back(get(L.omega, k));
    cand.v_alpha.push_back(k + 1 < n ? get(L.w, k) : Vec3::Zero());
    out.cost += quad_weight(k, iterate.grid) * stage_cost(cand.u_star.back(), cand.alpha.back(), sc);
  }
  out.slack = x.segment(L.nu_pos, L.t1 - L.nu_pos).sum();
  return out;
}

IterateMerit evaluate_iterate(const PlanResult& it, const Scenario& sc) {
  IterateMerit m;
  const int n = it.size();
  const double dt = it.grid.dt;
  const Vec3 dist = sc.model.dist_bound + Vec3::Constant(sc.model.eta);
  const Vec3& lam = sc.sliding.lambda;
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<size_t>(k);
    m.cost += quad_weight(k, it.grid) * stage_cost(it.u_star[i], it.alpha[i], sc);
    if (k + 1 < n) {
      const State s0{it.r_star[i], it.v_star[i]}, s1{it.r_star[i + 1], it.v_star[i + 1]};
      const Vec3 dv = it.v_star[i + 1] - it.v_star[i] -
                      0.5 * dt * (nominal_accel(s0, it.u_star[i], sc.model) +
                                  nominal_accel(s1, it.u_star[i + 1], sc.model));
      const Vec3 dphi =
          it.phi[i + 1] - it.phi[i] -
          dt * (-it.alpha[i].cwiseProduct(it.phi[i]) + planner_delta(it.v_star[i], sc) + dist);
      m.violation += dv.lpNorm<1>() + dphi.lpNorm<1>();
      m.max_defect = std::max({m.max_defect, dv.lpNorm<Eigen::Infinity>() / dt,
                               dphi.lpNorm<Eigen::Infinity>() / dt});
    }
    if (k > 0) {
      const Vec3 excess = it.v_star[i].cwiseAbs() + it.phi[i] + lam.cwiseProduct(it.omega[i]) -
                          Vec3::Constant(sc.bounds.speed_max);
      m.violation += excess.cwiseMax(0.0).sum();
      for (const Obstacle& ob : sc.obstacles) {
        const double need = tighten_obstacle(ob, it.omega[i]);
        m.violation += std::max(0.0, need - (ob.h_mat * it.r_star[i] - ob.center).norm());
      }
    }
    const Vec3 ufb = planner_ufb(it.v_star[i], it.phi[i], it.omega[i], it.alpha[i], sc);
    m.violation += std::max(0.0, it.u_star[i].norm() + ufb.norm() - sc.bounds.u_max);
  }
  return m;
}

void certify(PlanResult& pl, const Scenario& sc) {
  const IterateMerit m = evaluate_iterate(pl, sc);
  pl.max_defect = m.max_defect;

  // Re-propagate the tube through the tube module. A constant bound is the
  // state-dependent recursion with cd_bar = 0 and D raised by the constant.
  ModelParams p = sc.model;
  p.kink_eps = planner_eps(sc);
  if (constant_mode(sc)) {
    p.cd_bar = 0.0;
    p.cd_hat = 0.0;
    p.dist_bound += Vec3::Constant(sc.constant_delta);
  }
  const TubeProfile tp = propagate_tube_grid(pl.phi.front(), pl.omega.front(), pl.alpha,
                                             pl.v_star, pl.grid.dt, p, sc.sliding.lambda);
  double mis = 0.0;
  for (size_t k = 0; k < pl.phi.size(); ++k)
    mis = std::max({mis, (tp.phi[k] - pl.phi[k]).lpNorm<Eigen::Infinity>(),
                    (tp.omega[k] - pl.omega[k]).lpNorm<Eigen::Infinity>()});
  pl.tube_mismatch = mis;

  // Local RK4 re-integration of each interval under linearly interpolated u*.
  constexpr int kSub = 50;
  double err = 0.0;
  const double h = pl.grid.dt / kSub;
  for (int k = 0; k + 1 < pl.size(); ++k) {
    const auto i = static_cast<size_t>(k);
    State s{pl.r_star[i], pl.v_star[i]};
    auto u_at = [&](double tau) {
      return Vec3(pl.u_star[i] + (tau / pl.grid.dt) * (pl.u_star[i + 1] - pl.u_star[i]));
    };
    auto f = [&](const State& x, double tau) {
      return State{x.v, nominal_accel(x, u_at(tau), sc.model)};
    };
    auto axpy = [](const State& x, double a, const State& d) {
      return State{x.r + a * d.r, x.v + a * d.v};
    };
    for (int j = 0; j < kSub; ++j) {
      const double tau = j * h;
      const State k1 = f(s, tau);
      const State k2 = f(axpy(s, 0.5 * h, k1), tau + 0.5 * h);
      const State k3 = f(axpy(s, 0.5 * h, k2), tau + 0.5 * h);
      const State k4 = f(axpy(s, h, k3), tau + h);
      s.r += h / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
      s.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    }
    err = std::max({err, (s.r - pl.r_star[i + 1]).lpNorm<Eigen::Infinity>(),
                    (s.v - pl.v_star[i + 1]).lpNorm<Eigen::Infinity>()});
  }
  pl.reintegration_error = err;
}

PlanResult plan(const Scenario& sc, const TranscriptionGrid& grid, const ScpConfig& cfg,
                const std::optional<PlanResult>& initial_guess) {
  sc.validate();
  grid.validate();
  cfg.validate();
  PlanResult cur = initial_guess ? *initial_guess : straight_line_init(sc, grid);
  cur.grid = grid;
  if (cur.size() != grid.n_nodes) throw InvalidArgument("plan: initial guess does not match grid");
  cur.history.clear();

  IterateMerit mc = evaluate_iterate(cur, sc);
  Vec3 trust = cfg.trust_radius;
  double prox = cfg.prox_weight;
  PlanStatus status = PlanStatus::kNotConverged;
  bool polishing = false;
  int iters = 0;
  std::vector<ScpIteration> history;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    iters = it;
    const double prox_use = polishing ? std::max(prox, cfg.polish_prox) : prox;
    const ConvexSubproblem sp = build_subproblem(cur, sc, grid, cfg, trust, prox_use);
    const SubproblemSolution sol = solve_subproblem(sp, cur, sc, cfg);
    ScpIteration rec;
    rec.iter = it;
    rec.socp_status = to_string(sol.socp.status);
    rec.socp_iterations = sol.socp.iterations;
    rec.trust = trust(0);
    rec.prox = prox_use;

    // A solver that stalls next to the optimum still returns a usable step.
    const SocpResult& so = sol.socp;
    const bool usable =
        so.status == SocpStatus::kOptimal ||
        (so.status != SocpStatus::kInfeasible && so.x.size() > 0 && so.primal_residual < 1e-7 &&
         so.dual_residual < 1e-7 && so.gap <= 1e-6 * std::max(1.0, std::abs(so.objective)));
    bool accepted = false;
    double step = 0.0;
    const double violation_before = mc.violation;
    if (usable) {
      const IterateMerit mn = evaluate_iterate(sol.candidate, sc);
      const double merit_cur = mc.cost + cfg.penalty * mc.violation;
      const double merit_new = mn.cost + cfg.penalty * mn.violation;
      const double predicted = sol.cost + cfg.penalty * sol.slack;
      const double rho = (merit_cur - merit_new) /
                         std::max(merit_cur - predicted, 1e-9 * std::max(1.0, std::abs(merit_cur)));
      for (int k = 0; k < grid.n_nodes; ++k) {
        const auto i = static_cast<size_t>(k);
        step = std::max({step, (sol.candidate.r_star[i] - cur.r_star[i]).lpNorm<Eigen::Infinity>(),
                         (sol.candidate.v_star[i] - cur.v_star[i]).lpNorm<Eigen::Infinity>(),
                         (sol.candidate.alpha[i] - cur.alpha[i]).lpNorm<Eigen::Infinity>()});
      }
      const bool decreased = merit_new <= merit_cur + 1e-9 * std::abs(merit_cur);
      const bool worse_violation = mn.violation > std::max(mc.violation, 1e-6);
      accepted = it == 1 || (decreased && !worse_violation);
      rec.cost = mn.cost;
      rec.violation = mn.violation;
      rec.max_defect = mn.max_defect;
      rec.merit = merit_new;
      rec.predicted = predicted;
      rec.rho = rho;
      rec.step = step;

      if (!accepted) {
        trust *= cfg.trust_shrink;
        prox *= 3.0;
      } else if (it > 1 && rho < cfg.rho_low) {
        trust *= cfg.trust_shrink;
        prox *= 3.0;
      } else if (it > 1 && rho > cfg.rho_high) {
        trust = (2.0 * trust).cwiseMin(cfg.trust_radius);
        prox = std::max(prox / 3.0, 1e-3);
      }
      if (accepted) {
        // Once the cost stalls the remaining work is restoring feasibility.
        if (it > 1 && std::abs(mn.cost - mc.cost) <=
                          cfg.polish_cost_change * std::max(1.0, std::abs(mc.cost)))
          polishing = true;
        cur = sol.candidate;
        mc = mn;
      }
    } else {
      trust *= cfg.trust_shrink;
      prox *= 3.0;
    }
    rec.accepted = accepted;
    history.push_back(rec);

    // A usable subproblem that barely moves certifies the current iterate,
    // even when merit noise rejects the step itself.
    const bool small_step = usable && step <= cfg.convergence_tol;
    if (small_step && mc.max_defect <= cfg.defect_tol && mc.violation <= cfg.violation_tol) {
      status = PlanStatus::kConverged;
      break;
    }
    // Short steps that still halve the violation are the tail of a restoration,
    // not a stall.
    const bool restoring = accepted && mc.violation <= 0.5 * violation_before;
    const bool collapsed = trust.maxCoeff() < cfg.min_trust;
    if (((small_step && !restoring) || collapsed) && mc.violation > cfg.infeasible_violation) {
      status = PlanStatus::kInfeasible;
      break;
    }
    if (collapsed) break;
  }

  cur.status = status;
  cur.iterations = iters;
  cur.cost = mc.cost;
  cur.violation = mc.violation;
  cur.history = std::move(history);
  certify(cur, sc);
  return cur;
}

}  // namespace dtmpc
