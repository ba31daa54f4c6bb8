// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtmpc/scenario_io.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#ifndef DTMPC_VERSION
#define DTMPC_VERSION "unknown"
#endif

namespace dtmpc {

std::string tool_version() { return DTMPC_VERSION; }

namespace {

std::string location_prefix(int line, int column) {
  if (line <= 0) return {};
  return fmt::format("line {}, column {}: ", line, column);
}

class Reader {
 public:
  explicit Reader(const std::string& text) {
    try {
      root_ = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
      throw ScenarioError("", e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (!root_.IsMap()) throw ScenarioError("", "scenario must be a mapping", 1, 1);
  }

  Scenario read() {
    Scenario sc;
    check_keys(root_, "", {"schema_version", "name", "model", "sliding", "bounds", "boundary",
                           "weights", "tube", "uncertainty", "grid", "obstacles", "rhc",
                           "montecarlo"});
    const YAML::Node ver = root_["schema_version"];
    if (!ver) throw ScenarioError("schema_version", "is required", 1, 1);
    const int v = integer(ver, "schema_version");
    if (v != kScenarioSchemaVersion)
      fail(ver, "schema_version",
           fmt::format("unsupported version {} (expected {})", v, kScenarioSchemaVersion));
    if (auto n = root_["name"]) sc.name = string(n, "name");

    if (auto m = section("model")) {
      check_keys(m, "model",
                 {"cd_hat", "cd_bar", "gravity", "disturbance_bound", "eta", "kink_eps"});
      opt(m, "model", "cd_hat", sc.model.cd_hat);
      opt(m, "model", "cd_bar", sc.model.cd_bar);
      opt(m, "model", "gravity", sc.model.gravity);
      opt(m, "model", "disturbance_bound", sc.model.dist_bound);
      opt(m, "model", "eta", sc.model.eta);
      opt(m, "model", "kink_eps", sc.model.kink_eps);
    }
    if (auto s = section("sliding")) {
      check_keys(s, "sliding", {"lambda", "k_min"});
      opt(s, "sliding", "lambda", sc.sliding.lambda);
      opt(s, "sliding", "k_min", sc.sliding.k_min);
    }
    if (auto b = section("bounds")) {
      check_keys(b, "bounds", {"alpha_min", "alpha_max", "u_max", "v_alpha_max", "speed_max"});
      opt(b, "bounds", "alpha_min", sc.bounds.alpha_min);
      opt(b, "bounds", "alpha_max", sc.bounds.alpha_max);
      opt(b, "bounds", "u_max", sc.bounds.u_max);
      opt(b, "bounds", "v_alpha_max", sc.bounds.v_alpha_max);
      opt(b, "bounds", "speed_max", sc.bounds.speed_max);
    }
    if (auto b = section("boundary")) {
      check_keys(b, "boundary", {"r0", "v0", "rf", "vf", "t0", "tf"});
      opt(b, "boundary", "r0", sc.bc.r0);
      opt(b, "boundary", "v0", sc.bc.v0);
      opt(b, "boundary", "rf", sc.bc.rf);
      opt(b, "boundary", "vf", sc.bc.vf);
      opt(b, "boundary", "t0", sc.bc.t0);
      opt(b, "boundary", "tf", sc.bc.tf);
    }
    if (auto w = section("weights")) {
      check_keys(w, "weights", {"q", "r", "r_f"});
      opt(w, "weights", "q", sc.weights.q);
      opt(w, "weights", "r", sc.weights.r);
      opt(w, "weights", "r_f", sc.weights.r_f);
    }
    if (auto t = section("tube")) {
      check_keys(t, "tube", {"alpha0", "phi0", "omega0"});
      opt(t, "tube", "alpha0", sc.alpha0);
      if (auto p = t["phi0"]) sc.phi0 = vec3(p, "tube.phi0");
      opt(t, "tube", "omega0", sc.omega0);
    }
    if (auto u = section("uncertainty")) {
      check_keys(u, "uncertainty", {"mode", "constant_delta"});
      if (auto m = u["mode"]) {
        const std::string mode = string(m, "uncertainty.mode");
        if (mode == "state_dependent") {
          sc.uncertainty = UncertaintyMode::kStateDependent;
        } else if (mode == "constant") {
          sc.uncertainty = UncertaintyMode::kConstant;
        } else {
          fail(m, "uncertainty.mode", "must be state_dependent or constant");
        }
      }
      opt(u, "uncertainty", "constant_delta", sc.constant_delta);
    }
    if (auto g = section("grid")) {
      check_keys(g, "grid", {"nodes"});
      if (auto n = g["nodes"]) sc.nodes = integer(n, "grid.nodes");
    }
    if (auto o = root_["obstacles"]) {
      note("obstacles", o);
      if (!o.IsSequence()) fail(o, "obstacles", "must be a list");
      for (size_t i = 0; i < o.size(); ++i) sc.obstacles.push_back(obstacle(o[i], i));
    }
    if (auto r = section("rhc")) {
      check_keys(r, "rhc", {"visibility_radius", "replan_period"});
      opt(r, "rhc", "visibility_radius", sc.visibility_radius);
      opt(r, "rhc", "replan_period", sc.replan_period);
    }
    if (auto m = section("montecarlo")) {
      check_keys(m, "montecarlo", {"seed", "trials"});
      if (auto s = m["seed"]) sc.seed = unsigned64(s, "montecarlo.seed");
      if (auto t = m["trials"]) sc.trials = integer(t, "montecarlo.trials");
    }

    try {
      sc.validate();
    } catch (const InvalidArgument& e) {
      const std::string msg = e.what();
      const auto colon = msg.find(": ");
      const std::string field = colon == std::string::npos ? "" : msg.substr(0, colon);
      const std::string what = colon == std::string::npos ? msg : msg.substr(colon + 2);
      const YAML::Mark mk = mark_for(field);
      throw ScenarioError(field, what, mk.line + 1, mk.column + 1);
    }
    return sc;
  }

 private:
  [[noreturn]] void fail(const YAML::Node& n, const std::string& path, const std::string& what) {
    const YAML::Mark mk = n.Mark();
    throw ScenarioError(path, what, mk.line + 1, mk.column + 1);
  }

  void note(const std::string& path, const YAML::Node& n) { marks_[path] = n.Mark(); }

  // Mark of `field`, else of its nearest recorded ancestor, else line 1.
  YAML::Mark mark_for(std::string field) const {
    while (!field.empty()) {
      if (auto it = marks_.find(field); it != marks_.end()) return it->second;
      const auto cut = field.find_last_of(".[");
      if (cut == std::string::npos) break;
      field.resize(cut);
    }
    YAML::Mark top;
    top.line = 0;
    top.column = 0;
    return top;
  }

  YAML::Node section(const std::string& key) {
    YAML::Node n = root_[key];
    if (!n) return n;
    note(key, n);
    if (!n.IsMap()) fail(n, key, "must be a mapping");
    return n;
  }

  void check_keys(const YAML::Node& n, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      const std::string full = path.empty() ? key : path + "." + key;
      if (!allowed.count(key)) fail(kv.first, full, "unknown key");
      note(full, kv.second);
    }
  }

  double number(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) fail(n, path, "expected a number");
    double x = 0.0;
    try {
      x = n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected a number, got '" + n.Scalar() + "'");
    }
    if (!std::isfinite(x)) fail(n, path, "must be finite");
    return x;
  }

  int integer(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) fail(n, path, "expected an integer");
    try {
      return n.as<int>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected an integer, got '" + n.Scalar() + "'");
    }
  }

  std::uint64_t unsigned64(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) fail(n, path, "expected a non-negative integer");
    try {
      return n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      fail(n, path, "expected a non-negative integer, got '" + n.Scalar() + "'");
    }
  }

  std::string string(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) fail(n, path, "expected a string");
    return n.Scalar();
  }

  Eigen::VectorXd vector(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence()) fail(n, path, "expected a list of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n.size()));
    for (size_t i = 0; i < n.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = number(n[i], fmt::format("{}[{}]", path, i));
    return v;
  }

  Vec3 vec3(const YAML::Node& n, const std::string& path) {
    if (n.IsScalar()) return Vec3::Constant(number(n, path));
    const Eigen::VectorXd v = vector(n, path);
    if (v.size() != 3) fail(n, path, "expected 3 numbers");
    return v;
  }

  // A 3x3 matrix as three rows, or its diagonal as three numbers.
  Mat3 mat3(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() != 3) fail(n, path, "expected 3 rows or a 3-number diagonal");
    if (n[0].IsScalar()) return vec3(n, path).asDiagonal();
    Mat3 m;
    for (int i = 0; i < 3; ++i) m.row(i) = vec3(n[static_cast<size_t>(i)], fmt::format("{}[{}]", path, i));
    return m;
  }

  template <class T>
  void opt(const YAML::Node& sec, const std::string& path, const char* key, T& out) {
    const YAML::Node n = sec[key];
    if (!n) return;
    const std::string full = path + "." + key;
    if constexpr (std::is_same_v<T, double>) {
      out = number(n, full);
    } else if constexpr (std::is_same_v<T, Vec3>) {
      out = vec3(n, full);
    } else {
      out = mat3(n, full);
    }
  }

  Obstacle obstacle(const YAML::Node& n, size_t i) {
    const std::string path = fmt::format("obstacles[{}]", i);
    note(path, n);
    if (!n.IsMap()) fail(n, path, "must be a mapping");
    check_keys(n, path, {"shape", "center", "radius"});
    const YAML::Node shape = n["shape"], center = n["center"], radius = n["radius"];
    if (!shape) fail(n, path + ".shape", "is required");
    if (!center) fail(n, path + ".center", "is required");
    if (!radius) fail(n, path + ".radius", "is required");
    const std::string kind = string(shape, path + ".shape");
    const Eigen::VectorXd c = vector(center, path + ".center");
    const double r = number(radius, path + ".radius");
    if (kind == "cylinder") {
      if (c.size() != 2) fail(center, path + ".center", "a cylinder center has 2 numbers (x, y)");
      return Obstacle::cylinder(c(0), c(1), r);
    }
    if (kind == "sphere") {
      if (c.size() != 3) fail(center, path + ".center", "a sphere center has 3 numbers");
      return Obstacle::sphere(c, r);
    }
    fail(shape, path + ".shape", "must be cylinder or sphere");
  }

  YAML::Node root_;
  std::map<std::string, YAML::Mark> marks_;
};

std::string num(double x) { return fmt::format("{}", x); }
std::string vec(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s + "]";
}
std::string mat(const Mat3& m) {
  return fmt::format("[{}, {}, {}]", vec(m.row(0).transpose()), vec(m.row(1).transpose()),
                     vec(m.row(2).transpose()));
}

}  // namespace

ScenarioError::ScenarioError(const std::string& field, const std::string& what, int line,
                             int column)
    : std::runtime_error(location_prefix(line, column) + (field.empty() ? "" : field + ": ") +
                         what),
      field_(field),
      line_(line),
      column_(column) {}

Scenario parse_scenario(const std::string& yaml_text) { return Reader(yaml_text).read(); }

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("", "cannot open " + path.string(), 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& sc) {
  YAML::Emitter name;
  name << YAML::DoubleQuoted << sc.name;
  std::string out;
  auto line = [&](const std::string& s) { out += s + "\n"; };
  line(fmt::format("schema_version: {}", kScenarioSchemaVersion));
  line(fmt::format("name: {}", name.c_str()));
  line("model:");
  line("  cd_hat: " + num(sc.model.cd_hat));
  line("  cd_bar: " + num(sc.model.cd_bar));
  line("  gravity: " + vec(sc.model.gravity));
  line("  disturbance_bound: " + vec(sc.model.dist_bound));
  line("  eta: " + num(sc.model.eta));
  line("  kink_eps: " + num(sc.model.kink_eps));
  line("sliding:");
  line("  lambda: " + vec(sc.sliding.lambda));
  line("  k_min: " + num(sc.sliding.k_min));
  line("bounds:");
  line("  alpha_min: " + num(sc.bounds.alpha_min));
  line("  alpha_max: " + num(sc.bounds.alpha_max));
  line("  u_max: " + num(sc.bounds.u_max));
  line("  v_alpha_max: " + num(sc.bounds.v_alpha_max));
  line("  speed_max: " + num(sc.bounds.speed_max));
  line("boundary:");
  line("  r0: " + vec(sc.bc.r0));
  line("  v0: " + vec(sc.bc.v0));
  line("  rf: " + vec(sc.bc.rf));
  line("  vf: " + vec(sc.bc.vf));
  line("  t0: " + num(sc.bc.t0));
  line("  tf: " + num(sc.bc.tf));
  line("weights:");
  line("  q: " + mat(sc.weights.q));
  line("  r: " + mat(sc.weights.r));
  line("  r_f: " + mat(sc.weights.r_f));
  line("tube:");
  line("  alpha0: " + num(sc.alpha0));
  if (sc.phi0) line("  phi0: " + vec(*sc.phi0));
  line("  omega0: " + vec(sc.omega0));
  line("uncertainty:");
  line(std::string("  mode: ") +
       (sc.uncertainty == UncertaintyMode::kConstant ? "constant" : "state_dependent"));
  line("  constant_delta: " + num(sc.constant_delta));
  line("grid:");
  line(fmt::format("  nodes: {}", sc.nodes));
  if (sc.obstacles.empty()) {
    line("obstacles: []");
  } else {
    line("obstacles:");
    for (const Obstacle& o : sc.obstacles) {
      line(std::string("  - shape: ") +
           (o.shape == ObstacleShape::kCylinder ? "cylinder" : "sphere"));
      line("    center: " + vec(o.center));
      line("    radius: " + num(o.radius));
    }
  }
  line("rhc:");
  line("  visibility_radius: " + num(sc.visibility_radius));
  line("  replan_period: " + num(sc.replan_period));
  line("montecarlo:");
  line(fmt::format("  seed: {}", sc.seed));
  line(fmt::format("  trials: {}", sc.trials));
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string scenario_hash(const Scenario& sc) { return sha256_hex(serialize_scenario(sc)); }

}  // namespace dtmpc
