// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// CSV traces and JSON records written by the command-line tool.
//
// A trace file starts with '#'-prefixed metadata lines ("# key: value"), then
// one header row of column names, then numeric rows at 17 significant digits.
// Plotting tools can skip the metadata as comments.
#pragma once

#include <iosfwd>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtmpc/simulation.hpp"

namespace dtmpc {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Provenance carried by every output file.
struct Provenance {
  std::string kind;  // "plan", "sim", ...
  std::string tool_version;
  std::string scenario_hash;
};

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Index of a column; throws TraceError when absent.
  size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
void write_csv(std::ostream& out, const CsvTable& table);

// Columns: t, r_star_*, v_star_*, u_star_*, alpha_*, v_alpha_*, phi_*, omega_*.
CsvTable plan_table(const PlanResult& plan, const Provenance& prov);
// Rebuilds the node arrays and a uniform grid from the t column. Status and
// history are not stored in the trace.
PlanResult plan_from_table(const CsvTable& table);

// Columns: t, r_*, v_*, r_star_*, v_star_*, u_*, s_*, phi_*, alpha_*, omega_*,
// s_ok_*, r_ok_* (flags as 0/1).
CsvTable sim_table(const SimTrace& trace, const Provenance& prov);

Provenance provenance_of(const CsvTable& table);

nlohmann::json provenance_json(const Provenance& prov);
nlohmann::json plan_diagnostics(const PlanResult& plan, const Provenance& prov);
nlohmann::json monte_carlo_summary(const MonteCarloReport& rep, const MonteCarloConfig& cfg,
                                   const Provenance& prov);
nlohmann::json rhc_summary(const RhcResult& res, const Provenance& prov);

}  // namespace dtmpc
