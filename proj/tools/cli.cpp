// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include "dtmpc/scenario_io.hpp"
#include "dtmpc/trace_io.hpp"

namespace dtmpc::cli {

namespace fs = std::filesystem;

namespace {

// Raised for anything that maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  Scenario scenario;
  std::string hash;
  Provenance prov(const std::string& kind) const { return {kind, tool_version(), hash}; }
};

Context load(const std::string& path) {
  Context c;
  try {
    c.scenario = load_scenario(path);
  } catch (const ScenarioError& e) {
    throw InputError(path + ": " + e.what());
  }
  c.hash = scenario_hash(c.scenario);
  return c;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InputError("cannot write " + path.string());
}

void write_table(const fs::path& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  write_csv(out, t);
  if (!out) throw InputError("cannot write " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

// The plan file must have been produced from this very scenario.
PlanResult load_plan(const std::string& path, const Context& ctx) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open plan " + path);
  CsvTable t;
  try {
    t = read_csv(in);
  } catch (const TraceError& e) {
    throw InputError(path + ": " + e.what());
  }
  const Provenance p = provenance_of(t);
  if (p.kind != "plan") throw InputError(path + ": not a plan trace");
  if (p.scenario_hash != ctx.hash)
    throw InputError(path + ": scenario hash " + p.scenario_hash + " does not match " + ctx.hash);
  if (p.tool_version != tool_version())
    spdlog::warn("{} was written by version {}, this is {}", path, p.tool_version, tool_version());
  try {
    return plan_from_table(t);
  } catch (const std::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Grid from the scenario, optionally overridden. Both flags must agree with tf.
TranscriptionGrid resolve_grid(const Scenario& sc, std::optional<int> nodes,
                               std::optional<double> dt) {
  const double span = sc.bc.tf - sc.bc.t0;
  int n = sc.nodes;
  if (nodes) n = *nodes;
  if (dt) {
    if (!(*dt > 0.0)) throw InputError("--dt must be positive");
    const double q = span / *dt;
    const double k = std::round(q);
    if (std::abs(q - k) > 1e-9 * std::max(1.0, q))
      throw InputError("--dt does not divide tf - t0 = " + std::to_string(span));
    if (nodes && *nodes != static_cast<int>(k) + 1)
      throw InputError("--nodes and --dt disagree with tf - t0 = " + std::to_string(span));
    n = static_cast<int>(k) + 1;
  }
  if (n < 2) throw InputError("grid needs at least two nodes");
  return TranscriptionGrid::uniform(sc.bc.t0, sc.bc.tf, n);
}

int cmd_validate(const std::string& scenario) {
  const Context ctx = load(scenario);
  spdlog::info("{} is valid ({} obstacles)", scenario, ctx.scenario.obstacles.size());
  fmt::print("{}\n", ctx.hash);
  return kOk;
}

struct PlanArgs {
  std::string scenario, out;
  std::optional<int> nodes, max_iters;
  std::optional<double> dt;
};

int cmd_plan(const PlanArgs& a) {
  const Context ctx = load(a.scenario);
  const TranscriptionGrid grid = resolve_grid(ctx.scenario, a.nodes, a.dt);
  ScpConfig cfg;
  if (a.max_iters) cfg.max_iters = *a.max_iters;
  ensure_dir(a.out);
  spdlog::info("planning {} on {} nodes (dt {})", ctx.scenario.name, grid.n_nodes, grid.dt);
  const PlanResult p = plan(ctx.scenario, grid, cfg);
  for (const ScpIteration& h : p.history)
    spdlog::debug("iter {:2d} {} cost {:.6g} violation {:.3e} step {:.3e}{}", h.iter,
                  h.socp_status, h.cost, h.violation, h.step, h.accepted ? "" : " rejected");
  write_table(fs::path(a.out) / "plan.csv", plan_table(p, ctx.prov("plan")));
  write_json(fs::path(a.out) / "plan_diagnostics.json", plan_diagnostics(p, ctx.prov("plan")));
  spdlog::info("{} after {} iterations, cost {:.6g}, max defect {:.3e}", to_string(p.status),
               p.iterations, p.cost, p.max_defect);
  switch (p.status) {
    case PlanStatus::kConverged: return kOk;
    case PlanStatus::kNotConverged: return kNotConverged;
    case PlanStatus::kInfeasible: return kInfeasible;
  }
  return kNotConverged;
}

struct SimArgs {
  std::string scenario, plan, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double step = 0.005;
  double scale = 1.0;
  bool zero_disturbance = false;
};

int cmd_simulate(const SimArgs& a) {
  const Context ctx = load(a.scenario);
  const PlanResult p = load_plan(a.plan, ctx);
  const std::uint64_t seed = a.seed_set ? a.seed : ctx.scenario.seed;
  DisturbanceRealization dist;
  if (a.zero_disturbance) {
    dist.true_cd = ctx.scenario.model.cd_hat;
  } else {
    dist = sample_disturbance(seed, ctx.scenario.model, p.grid.tf - p.grid.t0, 0.1, a.scale);
  }
  ensure_dir(a.out);
  SimOptions opt;
  opt.step = a.step;
  SimTrace tr;
  try {
    tr = integrate_closed_loop(p, dist, ctx.scenario, opt);
  } catch (const InvalidArgument& e) {
    throw InputError(e.what());
  }
  const SimMetrics m = compute_metrics(tr, p, ctx.scenario);
  write_table(fs::path(a.out) / "sim.csv", sim_table(tr, ctx.prov("sim")));
  nlohmann::json j = provenance_json(ctx.prov("sim"));
  j["seed"] = seed;
  j["true_cd"] = dist.true_cd;
  j["max_s_ratio"] = m.max_s_ratio;
  j["max_r_ratio"] = m.max_r_ratio;
  j["min_clearance"] = m.min_clearance;
  j["control_effort"] = m.control_effort;
  j["mean_alpha_near"] = m.mean_alpha_near;
  j["mean_alpha_far"] = m.mean_alpha_far;
  const bool contained = m.max_s_ratio <= 1.0 + kContainmentTol &&
                         m.max_r_ratio <= 1.0 + kContainmentTol;
  j["contained"] = contained;
  write_json(fs::path(a.out) / "sim_summary.json", j);
  spdlog::info("max |s|/Phi {:.6f}, max |r~|/Omega {:.6f}, min clearance {:.4f}", m.max_s_ratio,
               m.max_r_ratio, m.min_clearance);
  return contained ? kOk : kNotConverged;
}

struct McArgs {
  std::string scenario, plan, out;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  double step = 0.005;
  double scale = 1.0;
  bool keep_traces = false;
};

int cmd_montecarlo(const McArgs& a) {
  const Context ctx = load(a.scenario);
  const PlanResult p = load_plan(a.plan, ctx);
  MonteCarloConfig cfg;
  cfg.trials = a.trials.value_or(ctx.scenario.trials);
  cfg.seed = a.seed.value_or(ctx.scenario.seed);
  cfg.threads = a.threads;
  cfg.step = a.step;
  cfg.disturbance_scale = a.scale;
  cfg.keep_traces = a.keep_traces;
  if (cfg.trials < 1) throw InputError("--trials must be at least 1");
  ensure_dir(a.out);
  MonteCarloReport rep;
  try {
    rep = monte_carlo(p, ctx.scenario, cfg);
  } catch (const InvalidArgument& e) {
    throw InputError(e.what());
  }
  write_json(fs::path(a.out) / "montecarlo.json",
             monte_carlo_summary(rep, cfg, ctx.prov("montecarlo")));
  if (cfg.keep_traces) {
    const fs::path dir = fs::path(a.out) / "traces";
    ensure_dir(dir.string());
    for (size_t i = 0; i < rep.traces.size(); ++i)
      write_table(dir / fmt::format("trial_{:05d}.csv", i), sim_table(rep.traces[i], ctx.prov("sim")));
  }
  spdlog::info("{} trials, {} violations, max excess {:.6f}", rep.n_trials, rep.violations,
               rep.max_excess);
  return rep.violations == 0 ? kOk : kNotConverged;
}

struct RhcArgs {
  std::string scenario, out;
  std::optional<std::uint64_t> seed;
  double step = 0.005;
  double scale = 1.0;
};

int cmd_rhc(const RhcArgs& a) {
  const Context ctx = load(a.scenario);
  RhcConfig rc;
  rc.seed = a.seed.value_or(ctx.scenario.seed);
  rc.step = a.step;
  rc.disturbance_scale = a.scale;
  ensure_dir(a.out);
  RhcResult res;
  try {
    res = receding_horizon_run(ctx.scenario, ScpConfig{}, rc);
  } catch (const PlanFailed& e) {
    spdlog::error("{}", e.what());
    write_table(fs::path(a.out) / "rhc_failed_plan.csv", plan_table(e.plan, ctx.prov("plan")));
    write_json(fs::path(a.out) / "rhc_failed_plan.json", plan_diagnostics(e.plan, ctx.prov("plan")));
    return e.plan.status == PlanStatus::kInfeasible ? kInfeasible : kNotConverged;
  } catch (const InvalidArgument& e) {
    throw InputError(e.what());
  }
  write_table(fs::path(a.out) / "rhc_trace.csv", sim_table(res.trace, ctx.prov("sim")));
  for (size_t i = 0; i < res.plans.size(); ++i)
    write_table(fs::path(a.out) / fmt::format("rhc_plan_{:02d}.csv", i),
                plan_table(res.plans[i], ctx.prov("plan")));
  write_json(fs::path(a.out) / "rhc_summary.json", rhc_summary(res, ctx.prov("rhc")));
  spdlog::info("{} plans, goal {}, min clearance {:.4f}", res.plans.size(),
               res.reached_goal ? "reached" : "missed", res.min_clearance);
  return res.reached_goal && !res.penetrated ? kOk : kNotConverged;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Dynamic tube MPC planner and closed-loop simulator"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  std::string level = "info";
  app.add_option("--log-level", level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string v_scenario;
  auto* v = app.add_subcommand("validate", "Parse and validate a scenario, print its hash");
  v->add_option("--scenario", v_scenario)->required();

  PlanArgs pa;
  auto* pl = app.add_subcommand("plan", "Solve the robust planning problem");
  pl->add_option("--scenario", pa.scenario)->required();
  pl->add_option("--out", pa.out)->required();
  pl->add_option("--nodes", pa.nodes);
  pl->add_option("--dt", pa.dt);
  pl->add_option("--max-iters", pa.max_iters);

  SimArgs sa;
  auto* si = app.add_subcommand("simulate", "Run one closed-loop simulation of a plan");
  si->add_option("--scenario", sa.scenario)->required();
  si->add_option("--plan", sa.plan)->required();
  si->add_option("--out", sa.out)->required();
  auto* seed_opt = si->add_option("--seed", sa.seed);
  si->add_option("--step", sa.step);
  si->add_option("--disturbance-scale", sa.scale);
  si->add_flag("--zero-disturbance", sa.zero_disturbance);

  McArgs ma;
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo tube-containment campaign");
  mc->add_option("--scenario", ma.scenario)->required();
  mc->add_option("--plan", ma.plan)->required();
  mc->add_option("--out", ma.out)->required();
  mc->add_option("--trials", ma.trials);
  mc->add_option("--seed", ma.seed);
  mc->add_option("--threads", ma.threads);
  mc->add_option("--step", ma.step);
  mc->add_option("--disturbance-scale", ma.scale);
  mc->add_flag("--keep-traces", ma.keep_traces);

  RhcArgs ra;
  auto* rh = app.add_subcommand("rhc", "Receding-horizon run with obstacle discovery");
  rh->add_option("--scenario", ra.scenario)->required();
  rh->add_option("--out", ra.out)->required();
  rh->add_option("--seed", ra.seed);
  rh->add_option("--step", ra.step);
  rh->add_option("--disturbance-scale", ra.scale);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  // run() may be called more than once per process (tests); registry names are unique.
  spdlog::drop("dtmpc");
  auto logger = spdlog::stderr_color_mt("dtmpc");
  logger->set_level(spdlog::level::from_str(level));
  spdlog::set_default_logger(logger);

  try {
    if (*v) return cmd_validate(v_scenario);
    if (*pl) return cmd_plan(pa);
    if (*si) {
      sa.seed_set = seed_opt->count() > 0;
      return cmd_simulate(sa);
    }
    if (*mc) return cmd_montecarlo(ma);
    if (*rh) return cmd_rhc(ra);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kInputError;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kInputError;
  }
  return kInputError;
}

}  // namespace dtmpc::cli
