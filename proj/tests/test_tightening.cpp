// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "dtmpc/sliding.hpp"
#include "dtmpc/tightening.hpp"
#include "dtmpc/tube.hpp"
#include "support.hpp"

namespace dtmpc {
namespace {

constexpr int kSamples = 10000;

NormConstraint identity_constraint(double c) {
  return NormConstraint{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), c};
}

TEST(WorstCaseNorm, MatchesBruteForceOverAllVertices) {
  std::mt19937_64 g(2);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd p(2, 4);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = n(g);
    Eigen::VectorXd b = Eigen::VectorXd::Random(4).cwiseAbs();
    double best = 0;
    for (int mask = 0; mask < 16; ++mask) {
      Eigen::VectorXd x(4);
      for (int j = 0; j < 4; ++j) x(j) = (mask >> j & 1) ? b(j) : -b(j);
      best = std::max(best, (p * x).norm());
    }
    EXPECT_NEAR(worst_case_norm(p, b), best, 1e-12);
  }
}

TEST(TightenState, ZeroTubeIsIdentity) {
  const NormConstraint c = identity_constraint(2.5);
  EXPECT_EQ(tighten_state(c, Eigen::VectorXd::Zero(3)).c, 2.5);
}

TEST(TightenState, IdentityMapSubtractsBoxDiagonal) {
  const NormConstraint t = tighten_state(identity_constraint(2.5), Eigen::Vector3d::Constant(0.3));
  EXPECT_NEAR(t.c, 2.5 - std::sqrt(0.27), 1e-12);
  EXPECT_NEAR(t.c, 1.9804, 1e-4);
}

TEST(TightenState, SingleAxisSpeedLimit) {
  NormConstraint c{Eigen::RowVector3d(0, 1, 0), Eigen::VectorXd::Zero(1), 2.5};
  EXPECT_NEAR(tighten_state(c, Eigen::Vector3d::Constant(0.3)).c, 2.2, 1e-12);
}

TEST(TightenState, NonPositiveBoundIsInfeasible) {
  EXPECT_THROW(tighten_state(identity_constraint(0.5), Eigen::Vector3d::Constant(0.3)),
               InfeasibleTightening);
}

// Any nominal point satisfying the tightened constraint, perturbed anywhere in
// the error box, satisfies the original.
TEST(TightenState, SoundUnderSampling) {
  std::mt19937_64 g(13);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  int counterexamples = 0;
  for (int trial = 0; trial < kSamples; ++trial) {
    const int rows = 1 + trial % 3;
    NormConstraint c{Eigen::MatrixXd(rows, 3), Eigen::VectorXd(rows), 3.0};
    for (Eigen::Index i = 0; i < c.p_mat.size(); ++i) c.p_mat.data()[i] = n(g);
    for (Eigen::Index i = 0; i < rows; ++i) c.q_vec(i) = 0.3 * n(g);
    const Vec3 omega = test::uniform_vec(g, 0.0, 0.4);
    NormConstraint t;
    try {
      t = tighten_state(c, omega);
    } catch (const InfeasibleTightening&) {
      continue;
    }
    // Nominal point on or inside the tightened boundary.
    Vec3 x_star = test::uniform_vec(g, -2, 2);
    const double norm = (c.p_mat * x_star + c.q_vec).norm();
    if (norm > t.c) {
      // Pull toward the point -P^+ q, which sits at the centre of the constraint.
      const Vec3 centre = -c.p_mat.completeOrthogonalDecomposition().solve(c.q_vec);
      const Vec3 d = x_star - centre;
      const double dn = (c.p_mat * d).norm();
      x_star = centre + d * (u(g) * t.c / dn);
    }
    const Vec3 x = x_star + test::in_box(g, omega);
    counterexamples += (c.p_mat * x + c.q_vec).norm() > c.c + 1e-12;
  }
  EXPECT_EQ(counterexamples, 0);
}

TEST(TightenObstacle, Examples) {
  const Obstacle cyl = Obstacle::cylinder(0, 0, 1.0);
  EXPECT_EQ(tighten_obstacle(cyl, Vec3::Zero()), 1.0);
  EXPECT_NEAR(tighten_obstacle(cyl, Vec3::Constant(0.2)), 1.0 + 0.2 * std::sqrt(2.0), 1e-12);
  // The vertical extent of a cylinder does not matter.
  EXPECT_NEAR(tighten_obstacle(cyl, Vec3(0.2, 0.2, 5.0)), 1.0 + 0.2 * std::sqrt(2.0), 1e-12);
  const Obstacle sph = Obstacle::sphere(Vec3(1, 2, 3), 0.5);
  EXPECT_NEAR(tighten_obstacle(sph, Vec3::Constant(0.1)), 0.5 + 0.1 * std::sqrt(3.0), 1e-12);
}

TEST(TightenObstacle, MonotoneInOmega) {
  std::mt19937_64 g(1);
  const Obstacle cyl = Obstacle::cylinder(0, 0, 0.7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 a = test::uniform_vec(g, 0, 1);
    const Vec3 b = a + test::uniform_vec(g, 0, 0.5);
    EXPECT_LE(tighten_obstacle(cyl, a), tighten_obstacle(cyl, b));
  }
}

TEST(TightenObstacle, SoundUnderSampling) {
  std::mt19937_64 g(29);
  std::uniform_real_distribution<double> u(0, 1);
  int counterexamples = 0;
  for (int trial = 0; trial < kSamples; ++trial) {
    const Obstacle obs = trial % 2 ? Obstacle::cylinder(u(g) * 4 - 2, u(g) * 4 - 2, 0.3 + u(g))
                                   : Obstacle::sphere(test::uniform_vec(g, -2, 2), 0.3 + u(g));
    const Vec3 omega = test::uniform_vec(g, 0, 0.5);
    const double reff = tighten_obstacle(obs, omega);
    // Nominal point just outside the tightened radius.
    Vec3 r_star = test::uniform_vec(g, -4, 4);
    Eigen::VectorXd off = obs.h_mat * r_star - obs.center;
    if (off.norm() < 1e-9) continue;
    const Eigen::VectorXd target = off.normalized() * reff * (1.0 + 0.2 * u(g));
    r_star += obs.h_mat.transpose() * (target - off);
    ASSERT_GE((obs.h_mat * r_star - obs.center).norm(), reff - 1e-12);
    counterexamples += obs.clearance(r_star + test::in_box(g, omega)) < -1e-12;
  }
  EXPECT_EQ(counterexamples, 0);
}

TEST(TightenActuator, Examples) {
  EXPECT_EQ(tighten_actuator(identity_constraint(5), Vec3::Zero()).c, 5.0);
  EXPECT_NEAR(tighten_actuator(identity_constraint(5), Vec3::Constant(0.8)).c, 5 - 0.8 * std::sqrt(3.0),
              1e-12);
  EXPECT_NEAR(tighten_actuator(identity_constraint(5), Vec3::Constant(0.8)).c, 3.6144, 1e-4);
  EXPECT_THROW(tighten_actuator(identity_constraint(1), Vec3::Constant(0.8)), InfeasibleTightening);
}

TEST(FeedbackControlBound, OnReferenceReducesToGain) {
  ModelParams p;
  const BoundaryLayer bl{Vec3(0.3, 0.5, 0.2), Vec3(1, 2, 3)};
  const ReferencePoint ref{Vec3::Zero(), Vec3(0.5, -1.2, 0.1), Vec3::Zero()};
  const Vec3 b = feedback_control_bound(ref, Vec3::Zero(), bl, SlidingParams{}, p);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(b(i), bl.alpha(i) * bl.phi(i), 1e-12);
}

TEST(FeedbackControlBound, MonotoneInVelocityError) {
  ModelParams p;
  std::mt19937_64 g(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const BoundaryLayer bl{test::uniform_vec(g, 0.05, 1), test::uniform_vec(g, 0.5, 4)};
    const ReferencePoint ref{Vec3::Zero(), test::uniform_vec(g, -2.5, 2.5), Vec3::Zero()};
    const Vec3 e1 = test::uniform_vec(g, 0, 1);
    const Vec3 e2 = e1 + test::uniform_vec(g, 0, 0.5);
    const Vec3 b1 = feedback_control_bound(ref, e1, bl, SlidingParams{}, p);
    const Vec3 b2 = feedback_control_bound(ref, e2, bl, SlidingParams{}, p);
    EXPECT_TRUE((b2.array() >= b1.array() - 1e-12).all());
  }
}

// Worst-case |u - u*| over the tube, by sampling, against the bound.
void check_bound_dominates(const ModelParams& p, const ReferencePoint& ref, const BoundaryLayer& bl,
                           const Vec3& vel_err, std::mt19937_64& g, int samples) {
  const SlidingParams sp;
  const Vec3 bound = feedback_control_bound(ref, vel_err, bl, sp, p);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < samples; ++k) {
    // Sample v in the velocity box (half the draws on its vertices) and the
    // switching term anywhere in [-1, 1], since r~ is unconstrained here.
    Vec3 dv = test::in_box(g, vel_err);
    if (k % 2) dv = dv.cwiseSign().cwiseProduct(vel_err);
    const State x{Vec3::Zero(), ref.v_star + dv};
    const Vec3 sat(u(g), u(g), u(g));
    const Vec3 k_gain = gain(x, ref, bl, p, sp.k_min);
    const Vec3 du = p.cd_hat * (x.v.norm() * x.v - ref.v_star.norm() * ref.v_star) -
                    sp.lambda.cwiseProduct(dv) - k_gain.cwiseProduct(sat);
    ASSERT_TRUE((du.cwiseAbs().array() <= bound.array() + 1e-12).all())
        << "v " << x.v.transpose() << " du " << du.transpose() << " bound " << bound.transpose();
  }
}

TEST(FeedbackControlBound, DominatesSampledFeedbackExample) {
  ModelParams p;
  std::mt19937_64 g(37);
  const ReferencePoint ref{Vec3::Zero(), Vec3(0, 1, 0), Vec3::Zero()};
  const BoundaryLayer bl{Vec3::Constant(0.5), Vec3::Ones()};
  check_bound_dominates(p, ref, bl, Vec3::Constant(0.5), g, 100000);
}

TEST(FeedbackControlBound, DominatesSampledFeedbackRandom) {
  std::mt19937_64 g(41);
  for (double eps : {0.0, 0.05}) {
    ModelParams p;
    p.kink_eps = eps;
    for (int trial = 0; trial < 200; ++trial) {
      const ReferencePoint ref{Vec3::Zero(), test::uniform_vec(g, -2.5, 2.5), Vec3::Zero()};
      const BoundaryLayer bl{test::uniform_vec(g, 0.05, 1.2), test::uniform_vec(g, 0.5, 4)};
      check_bound_dominates(p, ref, bl, test::uniform_vec(g, 0, 1.5), g, 500);
    }
  }
}

// Feedforward on or inside the tightened actuator ball plus any state in the
// tube box gives a total control inside the original ball.
TEST(TightenActuator, SoundUnderSampling) {
  std::mt19937_64 g(43);
  std::uniform_real_distribution<double> u01(0, 1);
  const SlidingParams sp;
  int counterexamples = 0, checked = 0;
  for (int trial = 0; trial < kSamples; ++trial) {
    ModelParams p;
    p.kink_eps = trial % 2 ? 0.05 : 0.0;
    p.gravity = trial % 3 ? Vec3::Zero() : Vec3(0, 0, -9.81);
    const Vec3 v_star = test::uniform_vec(g, -2, 2);
    const BoundaryLayer bl{test::uniform_vec(g, 0.05, 0.6), test::uniform_vec(g, 1.0, 4.0)};
    const Vec3 omega = test::uniform_vec(g, 0, 0.3);
    const Vec3 vel_err = velocity_error_bound(omega, bl.phi, sp.lambda);
    const ReferencePoint probe{Vec3::Zero(), v_star, Vec3::Zero()};
    const Vec3 ufb = feedback_control_bound(probe, vel_err, bl, sp, p);
    NormConstraint t;
    const double u_max = 12.0;
    try {
      t = tighten_actuator(identity_constraint(u_max), ufb);
    } catch (const InfeasibleTightening&) {
      continue;
    }
    // u* on the tightened sphere (the hardest case) or inside it.
    Vec3 u_star = test::uniform_vec(g, -1, 1);
    u_star *= (trial % 4 ? 1.0 : u01(g)) * t.c / u_star.norm();
    // Reference acceleration consistent with u*: r'' = -cd_hat |v*| v* + g + u*.
    ReferencePoint ref{Vec3::Zero(), v_star,
                       -p.cd_hat * v_star.norm() * v_star + p.gravity + u_star};
    const State x{test::in_box(g, omega), v_star + test::in_box(g, vel_err)};
    const Vec3 u = ancillary_control(x, ref, sp, bl, p);
    ++checked;
    counterexamples += u.norm() > u_max + 1e-9;
  }
  EXPECT_GT(checked, kSamples / 2);
  EXPECT_EQ(counterexamples, 0);
}

}  // namespace
}  // namespace dtmpc
