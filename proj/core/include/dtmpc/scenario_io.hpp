// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
//
// YAML scenario files. The schema is documented in docs/scenario_schema.md.
// Unknown keys are errors, missing sections take the defaults of Scenario.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "dtmpc/scenario.hpp"

namespace dtmpc {

inline constexpr int kScenarioSchemaVersion = 1;

// Tool version embedded in every output file.
std::string tool_version();

// A parse or validation failure located in the source text. line and column
// are 1-based; zero when no location is known.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& field, const std::string& what, int line, int column);
  const std::string& field() const { return field_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  std::string field_;
  int line_, column_;
};

// Parses and validates. Throws ScenarioError.
Scenario parse_scenario(const std::string& yaml_text);
Scenario load_scenario(const std::filesystem::path& path);

// Canonical YAML: fixed key order, shortest round-trip doubles, every field
// written. parse_scenario(serialize_scenario(s)) reproduces s exactly.
std::string serialize_scenario(const Scenario& sc);

// SHA-256 (lower-case hex) of the canonical serialization, so reformatting a
// file does not change it but any value change does.
std::string scenario_hash(const Scenario& sc);

// SHA-256 (lower-case hex) of arbitrary bytes.
std::string sha256_hex(const std::string& bytes);

}  // namespace dtmpc
