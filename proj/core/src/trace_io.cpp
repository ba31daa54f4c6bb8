// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/trace_io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

namespace dtmpc {

namespace {

const char* const kAxes[3] = {"x", "y", "z"};

void add_vec_columns(std::vector<std::string>& cols, const std::string& name) {
  for (const char* a : kAxes) cols.push_back(name + "_" + a);
}

void append(std::vector<double>& row, const Vec3& v) {
  row.insert(row.end(), {v(0), v(1), v(2)});
}

Vec3 vec_at(const CsvTable& t, const std::vector<double>& row, const std::string& name) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v(i) = row[t.column(name + "_" + kAxes[i])];
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, size_t line) {
  double x = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end)
    throw TraceError(fmt::format("line {}: '{}' is not a number", line, s));
  return x;
}

}  // namespace

size_t CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw TraceError("trace has no column '" + name + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon != std::string::npos)
        t.meta[trim(body.substr(0, colon))] = trim(body.substr(colon + 1));
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    const std::vector<std::string> cells = split(line);
    if (cells.size() != t.columns.size())
      throw TraceError(fmt::format("line {}: {} fields, header has {}", line_no, cells.size(),
                                   t.columns.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) row.push_back(parse_double(c, line_no));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw TraceError("trace has no header row");
  return t;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (const auto& [k, v] : table.meta) out << "# " << k << ": " << v << "\n";
  for (size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << "\n";
  std::string line;
  for (const auto& row : table.rows) {
    line.clear();
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) line += ',';
      line += fmt::format("{:.17g}", row[i]);
    }
    out << line << "\n";
  }
}

Provenance provenance_of(const CsvTable& table) {
  Provenance p;
  auto get = [&](const char* k) {
    auto it = table.meta.find(k);
    return it == table.meta.end() ? std::string() : it->second;
  };
  p.kind = get("kind");
  p.tool_version = get("tool_version");
  p.scenario_hash = get("scenario_sha256");
  return p;
}

namespace {
void stamp(CsvTable& t, const Provenance& prov) {
  t.meta["kind"] = prov.kind;
  t.meta["tool_version"] = prov.tool_version;
  t.meta["scenario_sha256"] = prov.scenario_hash;
}
}  // namespace

CsvTable plan_table(const PlanResult& plan, const Provenance& prov) {
  CsvTable t;
  stamp(t, prov);
  t.columns = {"t"};
  for (const char* n : {"r_star", "v_star", "u_star", "alpha", "v_alpha", "phi", "omega"})
    add_vec_columns(t.columns, n);
  for (int k = 0; k < plan.size(); ++k) {
    const auto i = static_cast<size_t>(k);
    std::vector<double> row{plan.grid.time(k)};
    for (const auto* v : {&plan.r_star, &plan.v_star, &plan.u_star, &plan.alpha, &plan.v_alpha,
                          &plan.phi, &plan.omega})
      append(row, (*v)[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

PlanResult plan_from_table(const CsvTable& table) {
  const int n = static_cast<int>(table.rows.size());
  if (n < 2) throw TraceError("plan trace needs at least two rows");
  const size_t tc = table.column("t");
  PlanResult p;
  p.grid = TranscriptionGrid::uniform(table.rows.front()[tc], table.rows.back()[tc], n);
  for (int k = 0; k < n; ++k) {
    const auto& row = table.rows[static_cast<size_t>(k)];
    if (std::abs(row[tc] - p.grid.time(k)) > 1e-9 * std::max(1.0, std::abs(row[tc])))
      throw TraceError(fmt::format("plan trace row {}: time is not on a uniform grid", k + 1));
    p.r_star.push_back(vec_at(table, row, "r_star"));
    p.v_star.push_back(vec_at(table, row, "v_star"));
    p.u_star.push_back(vec_at(table, row, "u_star"));
    p.alpha.push_back(vec_at(table, row, "alpha"));
    p.v_alpha.push_back(vec_at(table, row, "v_alpha"));
    p.phi.push_back(vec_at(table, row, "phi"));
    p.omega.push_back(vec_at(table, row, "omega"));
  }
  return p;
}

CsvTable sim_table(const SimTrace& trace, const Provenance& prov) {
  CsvTable t;
  stamp(t, prov);
  t.meta["step"] = fmt::format("{}", trace.step);
  t.columns = {"t"};
  for (const char* n :
       {"r", "v", "r_star", "v_star", "u", "s", "phi", "alpha", "omega", "s_ok", "r_ok"})
    add_vec_columns(t.columns, n);
  for (const SimSample& s : trace.samples) {
    std::vector<double> row{s.t};
    for (const Vec3* v : {&s.r, &s.v, &s.r_star, &s.v_star, &s.u, &s.s, &s.phi, &s.alpha, &s.omega})
      append(row, *v);
    for (bool b : s.s_contained) row.push_back(b ? 1.0 : 0.0);
    for (bool b : s.r_contained) row.push_back(b ? 1.0 : 0.0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

nlohmann::json provenance_json(const Provenance& prov) {
  return {{"kind", prov.kind},
          {"tool_version", prov.tool_version},
          {"scenario_sha256", prov.scenario_hash}};
}

nlohmann::json plan_diagnostics(const PlanResult& plan, const Provenance& prov) {
  nlohmann::json j = provenance_json(prov);
  j["status"] = to_string(plan.status);
  j["converged"] = plan.converged();
  j["iterations"] = plan.iterations;
  j["cost"] = plan.cost;
  j["violation"] = plan.violation;
  j["max_defect"] = plan.max_defect;
  j["tube_mismatch"] = plan.tube_mismatch;
  j["reintegration_error"] = plan.reintegration_error;
  j["nodes"] = plan.grid.n_nodes;
  j["dt"] = plan.grid.dt;
  nlohmann::json hist = nlohmann::json::array();
  for (const ScpIteration& h : plan.history)
    hist.push_back({{"iter", h.iter},
                    {"socp_status", h.socp_status},
                    {"socp_iterations", h.socp_iterations},
                    {"cost", h.cost},
                    {"violation", h.violation},
                    {"max_defect", h.max_defect},
                    {"merit", h.merit},
                    {"predicted", h.predicted},
                    {"rho", h.rho},
                    {"step", h.step},
                    {"trust", h.trust},
                    {"prox", h.prox},
                    {"accepted", h.accepted}});
  j["history"] = std::move(hist);
  return j;
}

nlohmann::json monte_carlo_summary(const MonteCarloReport& rep, const MonteCarloConfig& cfg,
                                   const Provenance& prov) {
  nlohmann::json j = provenance_json(prov);
  j["trials"] = rep.n_trials;
  j["seed"] = cfg.seed;
  j["step"] = cfg.step;
  j["disturbance_scale"] = cfg.disturbance_scale;
  j["violations"] = rep.violations;
  j["max_excess"] = rep.max_excess;
  j["min_clearance"] = rep.min_clearance;
  nlohmann::json per = nlohmann::json::array();
  for (const TrialResult& t : rep.trials)
    per.push_back({{"trial", t.trial},
                   {"seed", t.seed},
                   {"true_cd", t.true_cd},
                   {"max_s_ratio", t.max_s_ratio},
                   {"max_r_ratio", t.max_r_ratio},
                   {"min_clearance", t.min_clearance},
                   {"violated", t.violated}});
  j["per_trial"] = std::move(per);
  return j;
}

nlohmann::json rhc_summary(const RhcResult& res, const Provenance& prov) {
  nlohmann::json j = provenance_json(prov);
  j["reached_goal"] = res.reached_goal;
  j["penetrated"] = res.penetrated;
  j["min_clearance"] = res.min_clearance;
  j["replans"] = res.plans.size();
  nlohmann::json plans = nlohmann::json::array();
  for (size_t i = 0; i < res.plans.size(); ++i)
    plans.push_back({{"t0", res.replan_times[i]},
                     {"known_obstacles", res.known_obstacles[i]},
                     {"iterations", res.plans[i].iterations},
                     {"cost", res.plans[i].cost},
                     {"status", to_string(res.plans[i].status)}});
  j["plans"] = std::move(plans);
  return j;
}

}  // namespace dtmpc
