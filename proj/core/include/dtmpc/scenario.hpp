// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Everything a planning or simulation run needs to know about the problem.
// File I/O lives in scenario_io.hpp.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtmpc/sliding.hpp"
#include "dtmpc/tightening.hpp"

namespace dtmpc {

struct Bounds {
  double alpha_min = 0.5;
  double alpha_max = 4.0;
  double u_max = 5.0;        // ||u|| <= u_max
  double v_alpha_max = 2.0;  // |d alpha / dt| <= v_alpha_max
  double speed_max = 2.5;    // |v_i| <= speed_max per axis
};

struct BoundaryConditions {
  Vec3 r0 = Vec3(0.0, 0.0, 1.0);
  Vec3 v0 = Vec3(0.0, 1.0, 0.0);
  Vec3 rf = Vec3(0.0, 25.0, 1.0);
  Vec3 vf = Vec3(0.0, 1.0, 0.0);
  double t0 = 0.0;
  double tf = 14.0;
};

struct Weights {
  Mat3 q = 2.0 * Mat3::Identity();
  Mat3 r = 0.1 * Mat3::Identity();
  Mat3 r_f = 2.0 * Mat3::Identity();  // carried for completeness; the terminal state is pinned
};

enum class UncertaintyMode { kStateDependent, kConstant };

struct Scenario {
  std::string name = "unnamed";
  ModelParams model;
  SlidingParams sliding;
  Bounds bounds;
  BoundaryConditions bc;
  Weights weights;
  std::vector<Obstacle> obstacles;

  // Initial bandwidth used to derive the default Phi0.
  double alpha0 = 4.0;
  std::optional<Vec3> phi0;
  Vec3 omega0 = Vec3::Zero();

  // kConstant replaces Delta(v*) by constant_delta on every axis (planner only).
  UncertaintyMode uncertainty = UncertaintyMode::kStateDependent;
  double constant_delta = 1.25;

  int nodes = 57;
  double visibility_radius = 8.0;
  double replan_period = 2.0;
  std::uint64_t seed = 7;
  int trials = 1000;

  // Throws InvalidArgument naming the offending field.
  void validate() const;

  Vec3 initial_phi() const;
};

}  // namespace dtmpc
