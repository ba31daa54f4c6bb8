// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Primal-dual interior-point solver for
//
//   minimize    1/2 x'Px + c'x
//   subject to  Ax = b,  Gx + s = h,  s in K
//
// with K a product of a nonnegative orthant (first n_linear rows of G) and
// second-order cones {(t, u) : ||u|| <= t} in the order given by soc_dims.
#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace dtmpc {

using SparseMat = Eigen::SparseMatrix<double>;

struct ConeProgram {
  SparseMat p;  // symmetric; only the lower triangle is read
  Eigen::VectorXd c;
  SparseMat a;
  Eigen::VectorXd b;
  SparseMat g;
  Eigen::VectorXd h;
  int n_linear = 0;
  std::vector<int> soc_dims;

  int num_vars() const { return static_cast<int>(c.size()); }
  void validate() const;
};

enum class SocpStatus { kOptimal, kInfeasible, kNumericalFailure, kIterationLimit };
std::string to_string(SocpStatus s);

struct SocpSettings {
  int max_iter = 100;
  double feas_tol = 1e-8;   // relative primal and dual residual
  double gap_tol = 1e-8;    // relative duality gap
  double abs_gap_tol = 1e-9;
  double infeas_tol = 1e-8;
  double static_reg = 1e-9;
  int refine_steps = 3;
};

struct SocpResult {
  SocpStatus status = SocpStatus::kNumericalFailure;
  Eigen::VectorXd x, y, z, s;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double objective = 0.0;
};

SocpResult solve_socp(const ConeProgram& prob, const SocpSettings& settings = {});

}  // namespace dtmpc
