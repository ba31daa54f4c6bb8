// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Nesterov-Todd scaled Mehrotra predictor-corrector. Each iteration factors
// the quasi-definite system
//
//   [ P + dI   A'    G'        ] [dx]
//   [ A        -dI   0         ] [dy]
//   [ G        0     -W'W - dI ] [dz]
//
// with a fixed sparsity pattern, then polishes each solve by iterative
// refinement against the unregularized matrix.

#include "dtmpc/socp.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtmpc {

namespace {

using Eigen::VectorXd;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cones {
  int l = 0;
  std::vector<int> dims;
  std::vector<int> offsets;
  int m = 0;

  Cones(int n_linear, const std::vector<int>& soc) : l(n_linear), dims(soc) {
    int off = l;
    for (int q : dims) {
      offsets.push_back(off);
      off += q;
    }
    m = off;
  }
  int degree() const { return l + static_cast<int>(dims.size()); }
};

double min_eig(const Cones& k, const VectorXd& u) {
  double e = kInf;
  for (int i = 0; i < k.l; ++i) e = std::min(e, u(i));
  for (size_t c = 0; c < k.dims.size(); ++c) {
    const int o = k.offsets[c], q = k.dims[c];
    e = std::min(e, u(o) - u.segment(o + 1, q - 1).norm());
  }
  return e;
}

void add_identity(const Cones& k, VectorXd& u, double a) {
  for (int i = 0; i < k.l; ++i) u(i) += a;
  for (int o : k.offsets) u(o) += a;
}

VectorXd jordan(const Cones& k, const VectorXd& u, const VectorXd& v) {
  VectorXd w(k.m);
  for (int i = 0; i < k.l; ++i) w(i) = u(i) * v(i);
  for (size_t c = 0; c < k.dims.size(); ++c) {
    const int o = k.offsets[c], q = k.dims[c];
    w(o) = u.segment(o, q).dot(v.segment(o, q));
    w.segment(o + 1, q - 1) = u(o) * v.segment(o + 1, q - 1) + v(o) * u.segment(o + 1, q - 1);
  }
  return w;
}

// Solves lam o x = r.
VectorXd jordan_div(const Cones& k, const VectorXd& lam, const VectorXd& r) {
  VectorXd x(k.m);
  for (int i = 0; i < k.l; ++i) x(i) = r(i) / lam(i);
  for (size_t c = 0; c < k.dims.size(); ++c) {
    const int o = k.offsets[c], q = k.dims[c];
    const auto l1 = lam.segment(o + 1, q - 1);
    const auto r1 = r.segment(o + 1, q - 1);
    const double det = lam(o) * lam(o) - l1.squaredNorm();
    const double x0 = (lam(o) * r(o) - l1.dot(r1)) / det;
    x(o) = x0;
    x.segment(o + 1, q - 1) = (r1 - x0 * l1) / lam(o);
  }
  return x;
}

// Largest a >= 0 with u + a du in K, for u in the interior.
double max_step(const Cones& k, const VectorXd& u, const VectorXd& du) {
  double step = kInf;
  for (int i = 0; i < k.l; ++i)
    if (du(i) < 0.0) step = std::min(step, -u(i) / du(i));
  for (size_t c = 0; c < k.dims.size(); ++c) {
    const int o = k.offsets[c], q = k.dims[c];
    const auto u1 = u.segment(o + 1, q - 1);
    const auto d1 = du.segment(o + 1, q - 1);
    const double a = du(o) * du(o) - d1.squaredNorm();
    const double b = u(o) * du(o) - u1.dot(d1);
    const double cc = u(o) * u(o) - u1.squaredNorm();
    if (cc <= 0.0) return 0.0;
    double t = kInf;
    const double scale = du.segment(o, q).squaredNorm();
    if (std::abs(a) <= 1e-14 * scale) {
      if (b < 0.0) t = -cc / (2.0 * b);
    } else if (a < 0.0) {
      const double sq = std::sqrt(b * b - a * cc);
      t = b >= 0.0 ? (b + sq) / (-a) : cc / (sq - b);
    } else if (b < 0.0) {
      const double disc = b * b - a * cc;
      if (disc >= 0.0) t = cc / (-b + std::sqrt(disc));
    }
    step = std::min(step, t);
  }
  return step;
}

// W = diag(sqrt(s/z)) on the orthant; eta * hyperbolic reflection on each cone.
struct Scaling {
  VectorXd d;
  std::vector<double> eta;
  std::vector<VectorXd> w;

  VectorXd apply(const Cones& k, const VectorXd& v, bool inverse) const {
    VectorXd out(k.m);
    for (int i = 0; i < k.l; ++i) out(i) = inverse ? v(i) / d(i) : v(i) * d(i);
    for (size_t c = 0; c < k.dims.size(); ++c) {
      const int o = k.offsets[c], q = k.dims[c];
      const VectorXd& wc = w[c];
      const auto w1 = wc.tail(q - 1);
      const auto v1 = v.segment(o + 1, q - 1);
      const double sgn = inverse ? -1.0 : 1.0;
      const double w1v1 = w1.dot(v1);
      const double f = inverse ? 1.0 / eta[c] : eta[c];
      out(o) = f * (wc(0) * v(o) + sgn * w1v1);
      out.segment(o + 1, q - 1) = f * (v1 + (w1v1 / (1.0 + wc(0)) + sgn * v(o)) * w1);
    }
    return out;
  }
};

Scaling nt_scaling(const Cones& k, const VectorXd& s, const VectorXd& z) {
  Scaling sc;
  sc.d.resize(k.l);
  for (int i = 0; i < k.l; ++i) sc.d(i) = std::sqrt(s(i) / z(i));
  for (size_t c = 0; c < k.dims.size(); ++c) {
    const int o = k.offsets[c], q = k.dims[c];
    const VectorXd sv = s.segment(o, q), zv = z.segment(o, q);
    const double ss = sv(0) * sv(0) - sv.tail(q - 1).squaredNorm();
    const double zz = zv(0) * zv(0) - zv.tail(q - 1).squaredNorm();
    const VectorXd sb = sv / std::sqrt(ss);
    const VectorXd zb = zv / std::sqrt(zz);
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    VectorXd wb(q);
    wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
    wb.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
    sc.w.push_back(wb);
    sc.eta.push_back(std::pow(ss / zz, 0.25));
  }
  return sc;
}

class KktSystem {
 public:
  KktSystem(const ConeProgram& pr, const Cones& k, double reg) : k_(k), reg_(reg) {
    n_ = pr.num_vars();
    p_ = static_cast<int>(pr.a.rows());
    const int dim = n_ + p_ + k.m;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(pr.p.nonZeros() + pr.a.nonZeros() + pr.g.nonZeros() + dim) +
              16 * k.dims.size());
    for (int j = 0; j < pr.p.outerSize(); ++j)
      for (SparseMat::InnerIterator it(pr.p, j); it; ++it)
        if (it.row() >= it.col()) t.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < pr.a.outerSize(); ++j)
      for (SparseMat::InnerIterator it(pr.a, j); it; ++it)
        t.emplace_back(n_ + it.row(), it.col(), it.value());
    for (int j = 0; j < pr.g.outerSize(); ++j)
      for (SparseMat::InnerIterator it(pr.g, j); it; ++it)
        t.emplace_back(n_ + p_ + it.row(), it.col(), it.value());
    for (int i = 0; i < dim; ++i) t.emplace_back(i, i, 0.0);
    for (size_t c = 0; c < k.dims.size(); ++c) {
      const int o = n_ + p_ + k.offsets[c], q = k.dims[c];
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < i; ++j) t.emplace_back(o + i, o + j, 0.0);
    }
    mat_.resize(dim, dim);
    mat_.setFromTriplets(t.begin(), t.end());
    mat_.makeCompressed();

    base_diag_.resize(n_);
    for (int i = 0; i < n_ + p_; ++i) {
      diag_idx_.push_back(index_of(i, i));
      if (i < n_) base_diag_(i) = mat_.coeff(i, i);
    }
    base_reg_ = reg_;
    set_reg(reg_);
    for (int i = 0; i < k.l; ++i) lin_idx_.push_back(index_of(n_ + p_ + i, n_ + p_ + i));
    for (size_t c = 0; c < k.dims.size(); ++c) {
      const int o = n_ + p_ + k.offsets[c], q = k.dims[c];
      std::vector<long> idx;
      for (int i = 0; i < q; ++i)
        for (int j = 0; j <= i; ++j) idx.push_back(index_of(o + i, o + j));
      soc_idx_.push_back(std::move(idx));
    }
    ldlt_.analyzePattern(mat_);
  }

  // Writes -W'W - reg into the cone block and factors, raising the
  // regularization when a pivot breaks down.
  bool factor(const Scaling* w) {
    for (double reg = base_reg_; reg <= base_reg_ * 1e4; reg *= 100.0) {
      set_reg(reg);
      if (try_factor(w)) return true;
    }
    return false;
  }

  VectorXd solve(const VectorXd& rhs, int refine) const {
    VectorXd x = ldlt_.solve(rhs);
    for (int it = 0; it < refine; ++it) {
      const VectorXd r = rhs - (mat_.selfadjointView<Eigen::Lower>() * x - dreg_.cwiseProduct(x));
      x += ldlt_.solve(r);
    }
    return x;
  }

 private:
  void set_reg(double reg) {
    reg_ = reg;
    const int dim = static_cast<int>(mat_.rows());
    dreg_ = VectorXd::Constant(dim, -reg_);
    dreg_.head(n_).setConstant(reg_);
    double* val = mat_.valuePtr();
    for (int i = 0; i < n_ + p_; ++i)
      val[diag_idx_[static_cast<size_t>(i)]] = i < n_ ? base_diag_(i) + reg_ : -reg_;
  }

  bool try_factor(const Scaling* w) {
    double* val = mat_.valuePtr();
    for (int i = 0; i < k_.l; ++i) {
      const double di = w ? w->d(i) : 1.0;
      val[lin_idx_[static_cast<size_t>(i)]] = -di * di - reg_;
    }
    for (size_t c = 0; c < k_.dims.size(); ++c) {
      const int q = k_.dims[c];
      Eigen::MatrixXd w2 = Eigen::MatrixXd::Identity(q, q);
      if (w) {
        const VectorXd& wb = w->w[c];
        // W'W = eta^2 (2 w w' - J)
        w2 = 2.0 * wb * wb.transpose();
        w2(0, 0) -= 1.0;
        for (int i = 1; i < q; ++i) w2(i, i) += 1.0;
        w2 *= w->eta[c] * w->eta[c];
      }
      size_t e = 0;
      for (int i = 0; i < q; ++i)
        for (int j = 0; j <= i; ++j) val[soc_idx_[c][e++]] = -w2(i, j) - (i == j ? reg_ : 0.0);
    }
    ldlt_.factorize(mat_);
    return ldlt_.info() == Eigen::Success;
  }

  long index_of(int row, int col) {
    return static_cast<long>(&mat_.coeffRef(row, col) - mat_.valuePtr());
  }

  const Cones& k_;
  double reg_, base_reg_ = 0.0;
  int n_ = 0, p_ = 0;
  SparseMat mat_;
  VectorXd dreg_, base_diag_;
  std::vector<long> diag_idx_, lin_idx_;
  std::vector<std::vector<long>> soc_idx_;
  Eigen::SimplicialLDLT<SparseMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

std::string to_string(SocpStatus s) {
  switch (s) {
    case SocpStatus::kOptimal: return "optimal";
    case SocpStatus::kInfeasible: return "infeasible";
    case SocpStatus::kNumericalFailure: return "numerical_failure";
    case SocpStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

void ConeProgram::validate() const {
  const auto n = c.size();
  if (p.rows() != n || p.cols() != n) throw std::invalid_argument("socp: P must be n x n");
  if (a.cols() != n || a.rows() != b.size()) throw std::invalid_argument("socp: A/b mismatch");
  if (g.cols() != n || g.rows() != h.size()) throw std::invalid_argument("socp: G/h mismatch");
  long m = n_linear;
  for (int q : soc_dims) {
    if (q < 1) throw std::invalid_argument("socp: cone dimension must be positive");
    m += q;
  }
  if (m != g.rows()) throw std::invalid_argument("socp: cone dimensions do not match G rows");
}

SocpResult solve_socp(const ConeProgram& pr, const SocpSettings& st) {
  pr.validate();
  const Cones k(pr.n_linear, pr.soc_dims);
  const int n = pr.num_vars();
  const int p = static_cast<int>(pr.a.rows());
  const int m = k.m;
  SocpResult res;

  KktSystem kkt(pr, k, st.static_reg);
  auto split = [&](const VectorXd& sol, VectorXd& x, VectorXd& y, VectorXd& z) {
    x = sol.head(n);
    y = sol.segment(n, p);
    z = sol.tail(m);
  };

  VectorXd x, y, z, s;
  {
    if (!kkt.factor(nullptr)) return res;
    VectorXd rhs(n + p + m);
    rhs << -pr.c, pr.b, pr.h;
    split(kkt.solve(rhs, st.refine_steps), x, y, z);
    s = -z;
    const double ap = -min_eig(k, s);
    if (ap >= -1e-8) add_identity(k, s, 1.0 + ap);
    const double ad = -min_eig(k, z);
    if (ad >= -1e-8) add_identity(k, z, 1.0 + ad);
  }

  const double nb = std::max(1.0, pr.b.norm());
  const double nh = std::max(1.0, pr.h.norm());
  const double nc = std::max(1.0, pr.c.norm());

  for (int iter = 0;; ++iter) {
    const VectorXd px = pr.p.selfadjointView<Eigen::Lower>() * x;
    const VectorXd aty = pr.a.transpose() * y;
    const VectorXd gtz = pr.g.transpose() * z;
    const VectorXd rx = px + pr.c + aty + gtz;
    const VectorXd ry = pr.a * x - pr.b;
    const VectorXd rz = pr.g * x + s - pr.h;
    const double gap = s.dot(z);
    const double pcost = 0.5 * x.dot(px) + pr.c.dot(x);

    res.iterations = iter;
    res.primal_residual = std::max(ry.norm() / nb, rz.norm() / nh);
    res.dual_residual = rx.norm() / nc;
    res.gap = gap;
    res.objective = pcost;
    res.x = x;
    res.y = y;
    res.z = z;
    res.s = s;

    if (!std::isfinite(gap) || !x.allFinite()) {
      res.status = SocpStatus::kNumericalFailure;
      return res;
    }
    if (res.primal_residual <= st.feas_tol && res.dual_residual <= st.feas_tol &&
        (gap <= st.abs_gap_tol || gap <= st.gap_tol * std::max(1.0, std::abs(pcost)))) {
      res.status = SocpStatus::kOptimal;
      return res;
    }
    // Farkas certificate: A'y + G'z = 0, z in K*, b'y + h'z < 0.
    const double cert = -(pr.b.dot(y) + pr.h.dot(z));
    if (cert > 0.0 && (aty + gtz).norm() <= st.infeas_tol * cert &&
        (aty + gtz).norm() <= st.infeas_tol * cert / nc * std::max(1.0, z.norm())) {
      res.status = SocpStatus::kInfeasible;
      return res;
    }
    if (iter >= st.max_iter) {
      res.status = SocpStatus::kIterationLimit;
      return res;
    }

    const Scaling w = nt_scaling(k, s, z);
    const VectorXd lam = w.apply(k, z, false);
    if (!kkt.factor(&w)) {
      res.status = SocpStatus::kNumericalFailure;
      return res;
    }
    const double mu = gap / k.degree();

    auto direction = [&](const VectorXd& rc, VectorXd& dx, VectorXd& dy, VectorXd& dz,
                         VectorXd& ds) {
      const VectorXd u = jordan_div(k, lam, rc);
      const VectorXd wu = w.apply(k, u, false);
      VectorXd rhs(n + p + m);
      rhs << -rx, -ry, -rz - wu;
      split(kkt.solve(rhs, st.refine_steps), dx, dy, dz);
      ds = wu - w.apply(k, w.apply(k, dz, false), false);
    };

    VectorXd dx, dy, dz, ds;
    const VectorXd lamlam = jordan(k, lam, lam);
    direction(-lamlam, dx, dy, dz, ds);
    const double a_aff = std::min({1.0, max_step(k, s, ds), max_step(k, z, dz)});
    const double gap_aff = (s + a_aff * ds).dot(z + a_aff * dz);
    const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / gap, 3.0), 0.0, 1.0);

    VectorXd rc = -lamlam - jordan(k, w.apply(k, ds, true), w.apply(k, dz, false));
    add_identity(k, rc, sigma * mu);
    direction(rc, dx, dy, dz, ds);
    const double a = std::min(1.0, 0.99 * std::min(max_step(k, s, ds), max_step(k, z, dz)));
    if (!(a > 1e-12)) {
      res.status = SocpStatus::kNumericalFailure;
      return res;
    }
    x += a * dx;
    y += a * dy;
    z += a * dz;
    s += a * ds;
  }
}

}  // namespace dtmpc
