// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "dtmpc/rng.hpp"

namespace dtmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Node count that spans `span` in steps of `unit`, or -1 if not an integer.
int exact_ratio(double span, double unit) {
  const double q = span / unit;
  const double n = std::round(q);
  if (n < 1.0 || std::abs(q - n) > 1e-9 * std::max(1.0, q)) return -1;
  return static_cast<int>(n);
}

int steps_per_segment(double dt, double step) {
  if (!(step > 0.0) || step > dt / 4.0 * (1.0 + 1e-12))
    throw InvalidArgument("simulation: step must lie in (0, dt/4]");
  const int sps = exact_ratio(dt, step);
  if (sps < 0) throw InvalidArgument("simulation: dt must be an integer multiple of step");
  return sps;
}

// Plant and controller state integrated together.
struct LoopState {
  Vec3 r, v, phi, omega;

  LoopState operator+(const LoopState& o) const {
    return {r + o.r, v + o.v, phi + o.phi, omega + o.omega};
  }
  LoopState operator*(double a) const { return {a * r, a * v, a * phi, a * omega}; }
};

struct RunStats {
  double max_s_ratio = 0.0;
  double max_r_ratio = 0.0;
  double min_clearance = kInf;
};

double ratio(double num, double den) {
  if (den > 1e-12) return num / den;
  return num > 1e-12 ? kInf : 0.0;
}

class ClosedLoop {
 public:
  ClosedLoop(const PlanReference& ref, const DisturbanceRealization& dist, const Scenario& sc,
             const std::vector<Obstacle>& obstacles, double step, double t_origin)
      : ref_(ref),
        dist_(dist),
        sc_(sc),
        obstacles_(obstacles),
        step_(step),
        sps_(steps_per_segment(ref.dt(), step)),
        t_origin_(t_origin) {}

  // Integrates `segments` plan intervals starting at the plan's first node.
  // Records the state at the start of every `stride`-th step.
  void run(LoopState& x, int segments, int stride, RunStats& stats, SimTrace* trace) const {
    const int steps = segments * sps_;
    for (int j = 0; j < steps; ++j) {
      const int seg = j / sps_;
      const double tau = (j % sps_) * step_;
      const double t = ref_.t0() + seg * ref_.dt() + tau;
      const Vec3 d = dist_.at(t + 0.5 * step_ - t_origin_);
      observe(x, t, seg, stats, trace != nullptr && j % stride == 0 ? trace : nullptr);

      const LoopState k1 = rhs(x, t, seg, d);
      const LoopState k2 = rhs(x + k1 * (0.5 * step_), t + 0.5 * step_, seg, d);
      const LoopState k3 = rhs(x + k2 * (0.5 * step_), t + 0.5 * step_, seg, d);
      const LoopState k4 = rhs(x + k3 * step_, t + step_, seg, d);
      x = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step_ / 6.0);
    }
  }

  // Records the state at the plan's node `node`, seen from the interval before it.
  void observe_node(const LoopState& x, int node, RunStats& stats, SimTrace* trace) const {
    observe(x, ref_.t0() + node * ref_.dt(), std::max(node - 1, 0), stats, trace);
  }

 private:
  LoopState rhs(const LoopState& x, double t, int seg, const Vec3& d) const {
    const PlanReference::Sample rs = ref_.at(t, seg);
    const State st{x.r, x.v};
    const BoundaryLayer bl{x.phi, rs.alpha};
    const Vec3 u = ancillary_control(st, rs.ref, sc_.sliding, bl, sc_.model);
    LoopState dx;
    dx.r = x.v;
    dx.v = -dist_.true_cd * x.v.norm() * x.v + sc_.model.gravity + u + d;
    dx.phi = boundary_layer_rhs(bl, rs.ref.v_star, sc_.model);
    dx.omega = tube_rhs(x.omega, x.phi, sc_.sliding.lambda);
    return dx;
  }

  void observe(const LoopState& x, double t, int seg, RunStats& stats, SimTrace* trace) const {
    const PlanReference::Sample rs = ref_.at(t, seg);
    const State st{x.r, x.v};
    const Vec3 s = sliding_variable(st, rs.ref, sc_.sliding);
    const Vec3 r_err = (x.r - rs.ref.r_star).cwiseAbs();
    SimSample smp;
    for (int i = 0; i < 3; ++i) {
      const double sr = ratio(std::abs(s(i)), x.phi(i));
      const double rr = ratio(r_err(i), x.omega(i));
      stats.max_s_ratio = std::max(stats.max_s_ratio, sr);
      stats.max_r_ratio = std::max(stats.max_r_ratio, rr);
      smp.s_contained[static_cast<size_t>(i)] = sr <= 1.0 + kContainmentTol;
      smp.r_contained[static_cast<size_t>(i)] = rr <= 1.0 + kContainmentTol;
    }
    stats.min_clearance = std::min(stats.min_clearance, min_clearance(x.r, obstacles_));
    if (trace == nullptr) return;
    smp.t = t;
    smp.r = x.r;
    smp.v = x.v;
    smp.r_star = rs.ref.r_star;
    smp.v_star = rs.ref.v_star;
    smp.u = ancillary_control(st, rs.ref, sc_.sliding, BoundaryLayer{x.phi, rs.alpha}, sc_.model);
    smp.s = s;
    smp.phi = x.phi;
    smp.alpha = rs.alpha;
    smp.omega = x.omega;
    trace->samples.push_back(smp);
  }

  const PlanReference& ref_;
  const DisturbanceRealization& dist_;
  const Scenario& sc_;
  const std::vector<Obstacle>& obstacles_;
  double step_;
  int sps_;
  double t_origin_;
};

void require_simulatable(const Scenario& sc) {
  if (sc.uncertainty == UncertaintyMode::kConstant)
    throw InvalidArgument("simulation: constant-uncertainty scenarios are planner-only");
}

void check_plan(const PlanResult& plan) {
  const int n = plan.size();
  if (n < 2) throw InvalidArgument("simulation: plan needs at least two nodes");
  for (const auto* v : {&plan.v_star, &plan.u_star, &plan.alpha, &plan.phi, &plan.omega})
    if (static_cast<int>(v->size()) != n)
      throw InvalidArgument("simulation: plan arrays differ in length");
  plan.grid.validate();
  if (plan.grid.n_nodes != n) throw InvalidArgument("simulation: plan grid does not match nodes");
}

}  // namespace

PlanReference::PlanReference(const PlanResult& plan)
    : r_(plan.r_star),
      v_(plan.v_star),
      u_(plan.u_star),
      alpha_(plan.alpha),
      phi_(plan.phi),
      omega_(plan.omega),
      t0_(plan.grid.t0),
      dt_(plan.grid.dt),
      n_(plan.size()) {
  check_plan(plan);
}

PlanReference::Sample PlanReference::at(double t, int segment) const {
  int k = segment;
  if (k < 0) k = static_cast<int>(std::floor((t - t0_) / dt_));
  k = std::clamp(k, 0, n_ - 2);
  const auto i = static_cast<size_t>(k);
  const double h = dt_;
  const double s = (t - (t0_ + k * h)) / h;
  const double s2 = s * s, s3 = s2 * s;

  const Vec3 &r0 = r_[i], &r1 = r_[i + 1], &v0 = v_[i], &v1 = v_[i + 1];
  Sample out;
  out.ref.r_star = (2 * s3 - 3 * s2 + 1) * r0 + (s3 - 2 * s2 + s) * h * v0 +
                   (-2 * s3 + 3 * s2) * r1 + (s3 - s2) * h * v1;
  out.ref.v_star = ((6 * s2 - 6 * s) * r0 + (3 * s2 - 4 * s + 1) * h * v0 +
                    (-6 * s2 + 6 * s) * r1 + (3 * s2 - 2 * s) * h * v1) /
                   h;
  out.ref.a_star = ((12 * s - 6) * r0 + (6 * s - 4) * h * v0 + (-12 * s + 6) * r1 +
                    (6 * s - 2) * h * v1) /
                   (h * h);
  auto lerp = [&](const std::vector<Vec3>& y) { return (1.0 - s) * y[i] + s * y[i + 1]; };
  out.alpha = lerp(alpha_);
  out.u_star = lerp(u_);
  out.phi_plan = lerp(phi_);
  out.omega_plan = lerp(omega_);
  return out;
}

double min_clearance(const Vec3& r, const std::vector<Obstacle>& obstacles) {
  double c = kInf;
  for (const Obstacle& o : obstacles) c = std::min(c, o.clearance(r));
  return c;
}

SimTrace integrate_closed_loop(const PlanResult& plan, const DisturbanceRealization& dist,
                               const Scenario& sc, const SimOptions& opt) {
  require_simulatable(sc);
  if (opt.record_stride < 1) throw InvalidArgument("simulation: record_stride must be >= 1");
  const PlanReference ref(plan);
  const ClosedLoop loop(ref, dist, sc, sc.obstacles, opt.step, plan.grid.t0);

  const State x0 = opt.x0.value_or(State{plan.r_star.front(), plan.v_star.front()});
  const PlanReference::Sample s0 = ref.at(ref.t0(), 0);
  const Vec3 s = sliding_variable(x0, s0.ref, sc.sliding);
  const Vec3 phi0 = plan.phi.front();
  if (!(phi0.array() > 0.0).all()) throw InvalidArgument("simulation: plan Phi0 must be positive");
  if (!(s.array().abs() <= phi0.array() * (1.0 + kContainmentTol)).all())
    throw InvalidArgument("simulation: initial state lies outside the boundary layer");

  LoopState x{x0.r, x0.v, phi0, plan.omega.front().cwiseMax((x0.r - s0.ref.r_star).cwiseAbs())};
  SimTrace trace;
  trace.step = opt.step;
  RunStats stats;
  loop.run(x, ref.segments(), opt.record_stride, stats, &trace);
  loop.observe_node(x, ref.segments(), stats, &trace);
  return trace;
}

DisturbanceRealization sample_disturbance(std::uint64_t seed, const ModelParams& p,
                                          double duration, double hold_dt, double scale) {
  if (!(hold_dt > 0.0) || !(duration >= 0.0) || !(scale >= 0.0))
    throw InvalidArgument("sample_disturbance: hold_dt, duration and scale must be valid");
  std::mt19937_64 gen(seed);
  DisturbanceRealization d;
  d.hold_dt = hold_dt;
  d.true_cd = uniform(gen, 0.0, p.cd_bar);
  const auto n = static_cast<size_t>(std::floor(duration / hold_dt)) + 2;
  d.samples.resize(n);
  for (Vec3& w : d.samples)
    for (int i = 0; i < 3; ++i) w(i) = scale * p.dist_bound(i) * uniform(gen, -1.0, 1.0);
  return d;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

MonteCarloReport monte_carlo(const PlanResult& plan, const Scenario& sc,
                             const MonteCarloConfig& cfg) {
  require_simulatable(sc);
  if (cfg.trials < 1) throw InvalidArgument("monte_carlo: trials must be at least 1");
  if (cfg.trace_stride < 1) throw InvalidArgument("monte_carlo: trace_stride must be >= 1");
  const PlanReference ref(plan);
  const double duration = ref.tf() - ref.t0();

  MonteCarloReport rep;
  rep.n_trials = cfg.trials;
  rep.trials.resize(static_cast<size_t>(cfg.trials));
  if (cfg.keep_traces) rep.traces.resize(static_cast<size_t>(cfg.trials));

  parallel_for(cfg.trials, cfg.threads, [&](int i) {
    const auto idx = static_cast<size_t>(i);
    TrialResult& tr = rep.trials[idx];
    tr.trial = i;
    tr.seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(i));
    const DisturbanceRealization dist =
        sample_disturbance(tr.seed, sc.model, duration, 0.1, cfg.disturbance_scale);
    tr.true_cd = dist.true_cd;

    const ClosedLoop loop(ref, dist, sc, sc.obstacles, cfg.step, ref.t0());
    LoopState x{plan.r_star.front(), plan.v_star.front(), plan.phi.front(), plan.omega.front()};
    RunStats stats;
    SimTrace* trace = cfg.keep_traces ? &rep.traces[idx] : nullptr;
    if (trace) trace->step = cfg.step;
    loop.run(x, ref.segments(), cfg.trace_stride, stats, trace);
    loop.observe_node(x, ref.segments(), stats, trace);

    tr.max_s_ratio = stats.max_s_ratio;
    tr.max_r_ratio = stats.max_r_ratio;
    tr.min_clearance = stats.min_clearance;
    tr.violated = stats.max_s_ratio > 1.0 + kContainmentTol ||
                  stats.max_r_ratio > 1.0 + kContainmentTol;
  });

  rep.max_excess = -kInf;
  rep.min_clearance = kInf;
  for (const TrialResult& tr : rep.trials) {
    rep.violations += tr.violated ? 1 : 0;
    rep.max_excess = std::max(rep.max_excess, tr.max_s_ratio - 1.0);
    rep.min_clearance = std::min(rep.min_clearance, tr.min_clearance);
  }
  return rep;
}

RhcResult receding_horizon_run(const Scenario& sc, const ScpConfig& cfg, const RhcConfig& rhc) {
  sc.validate();
  require_simulatable(sc);
  if (rhc.record_stride < 1) throw InvalidArgument("rhc: record_stride must be >= 1");
  const TranscriptionGrid grid0 = TranscriptionGrid::uniform(sc.bc.t0, sc.bc.tf, sc.nodes);
  const int n_total = grid0.n_nodes;
  steps_per_segment(grid0.dt, rhc.step);
  const int period_nodes = exact_ratio(sc.replan_period, grid0.dt);
  if (period_nodes < 0)
    throw InvalidArgument("rhc: replan_period must be a multiple of the grid dt");
  if (rhc.min_replan_nodes < 2) throw InvalidArgument("rhc: min_replan_nodes must be >= 2");

  const DisturbanceRealization dist = sample_disturbance(
      rhc.seed, sc.model, grid0.tf - grid0.t0, 0.1, rhc.disturbance_scale);

  RhcResult out;
  out.trace.step = rhc.step;
  std::vector<bool> known(sc.obstacles.size(), false);
  LoopState x{sc.bc.r0, sc.bc.v0, sc.initial_phi(), sc.omega0};
  RunStats stats;
  std::optional<PlanResult> warm;
  int node = 0;

  while (node < n_total - 1) {
    for (size_t i = 0; i < sc.obstacles.size(); ++i)
      if (sc.obstacles[i].clearance(x.r) <= sc.visibility_radius) known[i] = true;

    Scenario local = sc;
    local.obstacles.clear();
    for (size_t i = 0; i < sc.obstacles.size(); ++i)
      if (known[i]) local.obstacles.push_back(sc.obstacles[i]);
    local.nodes = n_total - node;
    local.bc.t0 = grid0.time(node);
    local.bc.r0 = x.r;
    local.bc.v0 = x.v;
    local.phi0 = x.phi;
    local.omega0 = Vec3::Zero();  // the new reference starts at the true state

    const TranscriptionGrid grid =
        TranscriptionGrid::uniform(local.bc.t0, grid0.tf, local.nodes);
    if (warm) {
      PlanResult g;
      const auto shift = static_cast<long>(warm->size() - local.nodes);
      auto tail = [&](const std::vector<Vec3>& y) {
        return std::vector<Vec3>(y.begin() + shift, y.end());
      };
      g.r_star = tail(warm->r_star);
      g.v_star = tail(warm->v_star);
      g.u_star = tail(warm->u_star);
      g.alpha = tail(warm->alpha);
      g.v_alpha = tail(warm->v_alpha);
      g.phi = tail(warm->phi);
      g.omega = tail(warm->omega);
      g.r_star.front() = x.r;
      g.v_star.front() = x.v;
      g.phi.front() = x.phi;
      g.omega.front().setZero();
      warm = std::move(g);
    }

    PlanResult p = plan(local, grid, cfg, warm);
    if (!p.converged())
      throw PlanFailed("rhc: plan at t = " + std::to_string(local.bc.t0) + " " +
                           to_string(p.status) + " after " + std::to_string(p.iterations) +
                           " iterations",
                       std::move(p));
    out.replan_times.push_back(local.bc.t0);
    out.known_obstacles.push_back(static_cast<int>(local.obstacles.size()));

    int next = node + period_nodes;
    if (n_total - next < rhc.min_replan_nodes) next = n_total - 1;
    const PlanReference ref(p);
    const ClosedLoop loop(ref, dist, sc, sc.obstacles, rhc.step, grid0.t0);
    x.omega = Vec3::Zero();  // Phi carries over; the tracking error restarts at zero
    loop.run(x, next - node, rhc.record_stride, stats, &out.trace);
    if (next == n_total - 1) loop.observe_node(x, next - node, stats, &out.trace);

    out.plans.push_back(p);
    warm = std::move(p);
    node = next;
  }

  out.min_clearance = stats.min_clearance;
  out.penetrated = stats.min_clearance < 0.0;
  out.reached_goal = (x.r - sc.bc.rf).norm() <= rhc.goal_tolerance;
  return out;
}

SimMetrics compute_metrics(const SimTrace& trace, const PlanResult& plan, const Scenario& sc) {
  SimMetrics m;
  m.min_clearance = kInf;
  const Mat3& q = sc.weights.q;
  double a_near = 0.0, a_far = 0.0;
  const auto& smp = trace.samples;
  for (size_t k = 0; k < smp.size(); ++k) {
    const SimSample& s = smp[k];
    for (int i = 0; i < 3; ++i) {
      m.max_s_ratio = std::max(m.max_s_ratio, ratio(std::abs(s.s(i)), s.phi(i)));
      m.max_r_ratio = std::max(m.max_r_ratio, ratio(std::abs(s.r(i) - s.r_star(i)), s.omega(i)));
    }
    const double c = min_clearance(s.r, sc.obstacles);
    m.min_clearance = std::min(m.min_clearance, c);
    if (c < kNearClearance) {
      a_near += s.alpha.mean();
      ++m.n_near;
    } else if (c > kFarClearance) {
      a_far += s.alpha.mean();
      ++m.n_far;
    }
    if (k + 1 < smp.size()) {
      const SimSample& e = smp[k + 1];
      m.control_effort += 0.5 * (e.t - s.t) * (s.u.dot(q * s.u) + e.u.dot(q * e.u));
    }
  }
  for (int k = 0; k + 1 < plan.size(); ++k) {
    const Vec3& u0 = plan.u_star[static_cast<size_t>(k)];
    const Vec3& u1 = plan.u_star[static_cast<size_t>(k) + 1];
    m.plan_effort += 0.5 * plan.grid.dt * (u0.dot(q * u0) + u1.dot(q * u1));
  }
  if (m.n_near > 0) m.mean_alpha_near = a_near / m.n_near;
  if (m.n_far > 0) m.mean_alpha_far = a_far / m.n_far;
  return m;
}

PlanProximity plan_proximity(const PlanResult& plan, const Scenario& sc) {
  PlanProximity p;
  for (int k = 0; k < plan.size(); ++k) {
    const auto i = static_cast<size_t>(k);
    const double c = min_clearance(plan.r_star[i], sc.obstacles);
    const double a = plan.alpha[i].mean();
    const double v = plan.v_star[i].norm();
    if (c < kNearClearance) {
      p.mean_alpha_near += a;
      p.mean_speed_near += v;
      ++p.n_near;
    } else if (c > kFarClearance) {
      p.mean_alpha_far += a;
      p.mean_speed_far += v;
      ++p.n_far;
    }
  }
  if (p.n_near > 0) {
    p.mean_alpha_near /= p.n_near;
    p.mean_speed_near /= p.n_near;
  }
  if (p.n_far > 0) {
    p.mean_alpha_far /= p.n_far;
    p.mean_speed_far /= p.n_far;
  }
  return p;
}

}  // namespace dtmpc
