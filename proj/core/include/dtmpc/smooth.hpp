// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Smoothed kinks shared by the planner's bounds and the controller. Each
// smoothed function bounds its exact counterpart from the safe side, and
// reduces to it exactly when eps == 0. Templated so the planner can push
// Eigen AutoDiff scalars through the same expressions it certifies.
#pragma once

#include <cmath>

namespace dtmpc::smooth {

// |x| <= sabs(x) <= |x| + eps
template <class T>
T sabs(const T& x, double eps) {
  using std::abs;
  using std::sqrt;
  if (eps > 0.0) return sqrt(x * x + eps * eps);
  return x < T(0) ? T(-x) : x;
}

// max(x, 0) <= splus(x) <= max(x, 0) + eps / 2
template <class T>
T splus(const T& x, double eps) {
  using std::sqrt;
  if (eps > 0.0) return 0.5 * (x + sqrt(x * x + eps * eps));
  return x > T(0) ? x : T(0);
}

// max(x, 0) - eps / 2 < splus_under(x) <= max(x, 0)
template <class T>
T splus_under(const T& x, double eps) {
  if (eps > 0.0) return splus(x, eps) - 0.5 * eps;
  return x > T(0) ? x : T(0);
}

// max(a, b) <= smax(a, b) <= max(a, b) + eps
template <class T>
T smax(const T& a, const T& b, double eps) {
  using std::sqrt;
  if (eps > 0.0) {
    const T h = 0.5 * (a - b);
    return 0.5 * (a + b) + sqrt(h * h + eps * eps);
  }
  return a > b ? a : b;
}

}  // namespace dtmpc::smooth
