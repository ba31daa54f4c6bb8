// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "dtmpc/socp.hpp"

namespace dtmpc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

SparseMat sparse(const MatrixXd& m) { return m.sparseView(); }

ConeProgram empty_program(int n) {
  ConeProgram p;
  p.p = SparseMat(n, n);
  p.c = VectorXd::Zero(n);
  p.a = SparseMat(0, n);
  p.b = VectorXd(0);
  p.g = SparseMat(0, n);
  p.h = VectorXd(0);
  return p;
}

TEST(Socp, EqualityConstrainedQuadratic) {
  ConeProgram p = empty_program(1);
  p.p = sparse(MatrixXd::Constant(1, 1, 2.0));
  p.a = sparse(MatrixXd::Ones(1, 1));
  p.b = VectorXd::Ones(1);
  const SocpResult r = solve_socp(p);
  ASSERT_EQ(r.status, SocpStatus::kOptimal);
  EXPECT_NEAR(r.x(0), 1.0, 1e-7);
  EXPECT_NEAR(r.objective, 1.0, 1e-7);
}

TEST(Socp, ContradictoryBoundsAreInfeasible) {
  // x <= -1 and x >= 1.
  ConeProgram p = empty_program(1);
  MatrixXd g(2, 1);
  g << 1, -1;
  p.g = sparse(g);
  p.h = VectorXd::Constant(2, -1.0);
  p.n_linear = 2;
  EXPECT_EQ(solve_socp(p).status, SocpStatus::kInfeasible);
}

TEST(Socp, LinearObjectiveOverUnitBall) {
  // min c'x s.t. ||x|| <= 1  ->  x = -c/||c||.
  ConeProgram p = empty_program(3);
  p.c = VectorXd::Zero(3);
  p.c << 1.0, -2.0, 0.5;
  MatrixXd g = MatrixXd::Zero(4, 3);
  g.bottomRows(3) = -MatrixXd::Identity(3, 3);
  p.g = sparse(g);
  p.h = VectorXd::Zero(4);
  p.h(0) = 1.0;
  p.soc_dims = {4};
  const SocpResult r = solve_socp(p);
  ASSERT_EQ(r.status, SocpStatus::kOptimal);
  EXPECT_LT((r.x + p.c.normalized()).norm(), 1e-6);
  EXPECT_NEAR(r.objective, -p.c.norm(), 1e-7);
}

// Residuals of the optimality conditions, computed here from scratch.
struct Kkt {
  double stationarity, primal_eq, primal_cone, cone_membership, complementarity;
};

double soc_violation(const VectorXd& v) { return std::max(0.0, v.tail(v.size() - 1).norm() - v(0)); }

Kkt kkt_residuals(const ConeProgram& p, const SocpResult& r) {
  const MatrixXd pd = MatrixXd(p.p).selfadjointView<Eigen::Lower>();
  Kkt k{};
  k.stationarity = (pd * r.x + p.c + MatrixXd(p.a).transpose() * r.y +
                    MatrixXd(p.g).transpose() * r.z)
                       .lpNorm<Eigen::Infinity>();
  k.primal_eq = p.b.size() ? (MatrixXd(p.a) * r.x - p.b).lpNorm<Eigen::Infinity>() : 0.0;
  const VectorXd s = p.h - MatrixXd(p.g) * r.x;
  k.primal_cone = 0.0;
  k.cone_membership = 0.0;
  for (int i = 0; i < p.n_linear; ++i) {
    k.primal_cone = std::max(k.primal_cone, -s(i));
    k.cone_membership = std::max(k.cone_membership, -r.z(i));
  }
  int off = p.n_linear;
  for (int d : p.soc_dims) {
    k.primal_cone = std::max(k.primal_cone, soc_violation(s.segment(off, d)));
    k.cone_membership = std::max(k.cone_membership, soc_violation(r.z.segment(off, d)));
    off += d;
  }
  k.complementarity = std::abs(s.dot(r.z));
  return k;
}

TEST(Socp, RandomStrictlyFeasibleProblemsSatisfyKkt) {
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  auto randm = [&](int r, int c) {
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
    return m;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const int nv = 8, neq = 2, nlin = 5;
    const std::vector<int> cones = {3, 4};
    const int nsoc = 7;
    const VectorXd x0 = randm(nv, 1);
    const MatrixXd m = randm(nv, nv);
    ConeProgram p;
    p.p = sparse(MatrixXd((m.transpose() * m).triangularView<Eigen::Lower>()));
    if (trial % 5 == 0) p.p = SparseMat(nv, nv);  // some pure SOCPs
    p.c = randm(nv, 1);
    p.a = sparse(randm(neq, nv));
    p.b = MatrixXd(p.a) * x0;
    const MatrixXd g = randm(nlin + nsoc, nv);
    VectorXd s0(nlin + nsoc);
    for (int i = 0; i < nlin; ++i) s0(i) = u(gen);
    int off = nlin;
    for (int d : cones) {
      VectorXd tail = randm(d - 1, 1);
      s0(off) = tail.norm() + u(gen);
      s0.segment(off + 1, d - 1) = tail;
      off += d;
    }
    p.g = sparse(g);
    p.h = g * x0 + s0;
    p.n_linear = nlin;
    p.soc_dims = cones;
    // Bound the problem so a pure SOCP cannot run off to -infinity.
    if (trial % 5 == 0) {
      MatrixXd gb(nv + 1, nv);
      gb.setZero();
      gb.bottomRows(nv) = -MatrixXd::Identity(nv, nv);
      VectorXd hb = VectorXd::Zero(nv + 1);
      hb(0) = x0.norm() + 5.0;
      MatrixXd gall(g.rows() + gb.rows(), nv);
      gall << g, gb;
      VectorXd hall(g.rows() + gb.rows());
      hall << p.h, hb;
      p.g = sparse(gall);
      p.h = hall;
      p.soc_dims.push_back(nv + 1);
    }
    const SocpResult r = solve_socp(p);
    ASSERT_EQ(r.status, SocpStatus::kOptimal) << "trial " << trial;
    const Kkt k = kkt_residuals(p, r);
    EXPECT_LT(k.stationarity, 1e-6) << "trial " << trial;
    EXPECT_LT(k.primal_eq, 1e-6) << "trial " << trial;
    EXPECT_LT(k.primal_cone, 1e-6) << "trial " << trial;
    EXPECT_LT(k.cone_membership, 1e-6) << "trial " << trial;
    EXPECT_LT(k.complementarity, 1e-6) << "trial " << trial;
  }
}

TEST(Socp, ValidateRejectsInconsistentDimensions) {
  ConeProgram p = empty_program(2);
  p.g = sparse(MatrixXd::Ones(3, 2));
  p.h = VectorXd::Zero(2);
  EXPECT_THROW(p.validate(), std::exception);
}

}  // namespace
}  // namespace dtmpc
