#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "harnackflow/errors.hpp"
#include "harnackflow/flow.hpp"
#include "harnackflow/geometry.hpp"
#include "harnackflow/initial_data.hpp"

namespace harnackflow {

// Scenario files are line oriented:
//
//   # comment
//   [section]
//   key = value
//
// Keys are only valid inside their section; blank lines and text after '#'
// are ignored. Booleans are on/off, true/false or yes/no. See README.md for
// the full key list and defaults.

struct ActionPair {
  std::size_t node1 = 0;
  double t1 = 0.0;
  std::size_t node2 = 0;
  double t2 = 0.0;
};

struct ScenarioConfig {
  std::string name = "scenario";

  // [geometry]
  SurfaceKind kind = SurfaceKind::RotSphere;
  int n = 128;
  double radius = 1.0;
  double length = 1.0;
  double phi_amplitude = 0.0;

  // [initial]
  InitialProfile profile = InitialProfile::Constant;
  double c1 = 1.0;
  double c2 = 0.0;

  // [flow]
  HeatModel model = HeatModel::with_potential();
  double t_end = 0.0;
  double dt = 0.0;
  double dt_out = 0.0;

  // [monitors]
  double t0 = 0.0;
  double d = 1.0;
  bool harnack = true;
  bool trace = true;
  bool lyh = true;
  bool entropy = true;
  bool mass = true;
  bool gradient = false;
  bool closed_form = true;

  // [identities]
  bool identities = true;
  std::size_t fuzz = 100;

  // [action]
  std::size_t random_pairs = 20;
  int window = 5;
  std::vector<ActionPair> pairs;

  // [output]
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  /// Area of the initial metric divided by 8 pi; finite only on the sphere.
  double extinction_time() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class ConfigLine {
 public:
  ConfigLine(int line, std::string key, std::string value)
      : line_(line), key_(std::move(key)), value_(std::move(value)) {}

  const std::string& key() const { return key_; }

  double number() const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value_, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value_.size() || !std::isfinite(v)) fail("expected a number");
    return v;
  }

  long long integer() const {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(value_, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value_.size()) fail("expected an integer");
    return v;
  }

  std::size_t count() const {
    const long long v = integer();
    if (v < 0) fail("expected a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  bool flag() const {
    if (value_ == "on" || value_ == "true" || value_ == "yes") return true;
    if (value_ == "off" || value_ == "false" || value_ == "no") return false;
    fail("expected on/off");
  }

  const std::string& text() const { return value_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::SyntaxError,
                "line " + std::to_string(line_) + ": " + key_ + " = '" + value_ + "': " + what);
  }

 private:
  int line_;
  std::string key_;
  std::string value_;
};

inline ActionPair parse_pair(const ConfigLine& line) {
  std::istringstream in(line.text());
  ActionPair p;
  char c1 = 0, c2 = 0, c3 = 0;
  if (!(in >> p.node1 >> c1 >> p.t1 >> c2 >> p.node2 >> c3 >> p.t2) || c1 != ',' || c2 != ',' || c3 != ',') {
    line.fail("expected 'node1, t1, node2, t2'");
  }
  in >> std::ws;
  if (!in.eof()) line.fail("trailing text after pair");
  return p;
}

inline void apply(ScenarioConfig& c, const std::string& section, const ConfigLine& l) {
  const std::string& k = l.key();
  const std::string qualified = section.empty() ? k : section + "." + k;
  if (section == "scenario" && k == "name") { c.name = l.text(); return; }
  if (section == "geometry") {
    if (k == "kind") {
      if (l.text() == "sphere") c.kind = SurfaceKind::RotSphere;
      else if (l.text() == "torus") c.kind = SurfaceKind::Torus;
      else l.fail("expected sphere or torus");
      return;
    }
    if (k == "n") { c.n = static_cast<int>(l.integer()); return; }
    if (k == "radius") { c.radius = l.number(); return; }
    if (k == "length") { c.length = l.number(); return; }
    if (k == "phi_amplitude") { c.phi_amplitude = l.number(); return; }
  }
  if (section == "initial") {
    if (k == "profile") {
      try {
        c.profile = parse_initial_profile(l.text());
      } catch (const Error&) {
        l.fail("unknown profile");
      }
      return;
    }
    if (k == "c1") { c.c1 = l.number(); return; }
    if (k == "c2") { c.c2 = l.number(); return; }
  }
  if (section == "flow") {
    if (k == "equation") {
      if (l.text() == "with-potential") c.model = HeatModel::with_potential();
      else if (l.text() == "plain-heat") c.model = HeatModel::plain_heat();
      else l.fail("expected with-potential or plain-heat");
      return;
    }
    if (k == "c") { c.model = HeatModel{l.number()}; return; }
    if (k == "t_end") { c.t_end = l.number(); return; }
    if (k == "dt") { c.dt = l.number(); return; }
    if (k == "dt_out") { c.dt_out = l.number(); return; }
  }
  if (section == "monitors") {
    if (k == "t0") { c.t0 = l.number(); return; }
    if (k == "d") { c.d = l.number(); return; }
    if (k == "harnack") { c.harnack = l.flag(); return; }
    if (k == "trace") { c.trace = l.flag(); return; }
    if (k == "lyh") { c.lyh = l.flag(); return; }
    if (k == "entropy") { c.entropy = l.flag(); return; }
    if (k == "mass") { c.mass = l.flag(); return; }
    if (k == "gradient") { c.gradient = l.flag(); return; }
    if (k == "closed_form") { c.closed_form = l.flag(); return; }
  }
  if (section == "identities") {
    if (k == "enabled") { c.identities = l.flag(); return; }
    if (k == "fuzz") { c.fuzz = l.count(); return; }
  }
  if (section == "action") {
    if (k == "random_pairs") { c.random_pairs = l.count(); return; }
    if (k == "window") { c.window = static_cast<int>(l.integer()); return; }
    if (k == "pair") { c.pairs.push_back(parse_pair(l)); return; }
  }
  if (section == "output") {
    if (k == "dir") { c.out_dir = l.text(); return; }
    if (k == "seed") { c.seed = static_cast<std::uint64_t>(l.integer()); return; }
  }
  throw Error(ErrorKind::UnknownKey, "unknown key '" + qualified + "'");
}

inline void violation(const std::string& what) { throw Error(ErrorKind::ConstraintViolation, what); }

}  // namespace detail

inline double ScenarioConfig::extinction_time() const {
  if (kind != SurfaceKind::RotSphere) return std::numeric_limits<double>::infinity();
  return area(sphere_geometry(n, radius, phi_amplitude)) / (8.0 * std::numbers::pi);
}

/// Largest admissible step over [0, t_end]. On the sphere min e^{2 phi}
/// shrinks roughly like the area, so the initial bound is scaled by
/// A(t_end)/A(0) = 1 - t_end/T.
inline double cfl_bound_over_run(const ScenarioConfig& c) {
  const SurfaceGeometry geom = c.kind == SurfaceKind::RotSphere ? sphere_geometry(c.n, c.radius, c.phi_amplitude)
                                                                : torus_geometry(c.n, c.length, c.phi_amplitude);
  double bound = cfl_bound(geom);
  if (c.kind == SurfaceKind::RotSphere) bound *= 1.0 - c.t_end / c.extinction_time();
  return bound;
}

/// Fills defaults and checks cross-field constraints.
inline void finalize(ScenarioConfig& c) {
  using detail::violation;
  if (c.n < 4) violation("geometry.n must be >= 4");
  if (!(c.radius > 0.0)) violation("geometry.radius must be positive");
  if (!(c.length > 0.0)) violation("geometry.length must be positive");
  if (!(c.t_end > 0.0)) violation("flow.t_end must be set and positive");
  if (c.window < 1) violation("action.window must be >= 1");
  if (c.kind == SurfaceKind::RotSphere) {
    const double T = c.extinction_time();
    if (!(c.t_end < T)) {
      violation("flow.t_end = " + std::to_string(c.t_end) + " is not before the extinction time " + std::to_string(T));
    }
  }
  const Grid grid = c.kind == SurfaceKind::RotSphere ? Grid::sphere(c.n) : Grid::torus(c.n, c.length);
  ScalarField f0;
  try {
    f0 = initial_profile(grid, c.profile, c.c1, c.c2);
  } catch (const Error& e) {
    violation(e.what());
  }

  if (c.dt_out == 0.0) c.dt_out = c.t_end / 100.0;
  if (!(c.dt_out > 0.0) || c.dt_out > c.t_end) violation("flow.dt_out must lie in (0, t_end]");
  const double bound = cfl_bound_over_run(c);
  if (c.dt == 0.0) {
    c.dt = c.dt_out / std::ceil(c.dt_out / (0.9 * bound));
  } else if (!(c.dt > 0.0) || c.dt > bound) {
    violation("flow.dt = " + std::to_string(c.dt) + " violates the CFL bound 0.2*h^2*min(e^{2phi}) = " +
              std::to_string(bound) + " over the run");
  }
  try {
    steps_per_output(c.dt, c.dt_out);
  } catch (const Error&) {
    violation("flow.dt_out must be an integer multiple of flow.dt");
  }

  if (c.t0 == 0.0) c.t0 = std::ceil(0.05 * c.t_end / c.dt_out - 1e-9) * c.dt_out;
  if (!(c.t0 > 0.0) || c.t0 > c.t_end) violation("monitors.t0 must lie in (0, t_end]");
  if (c.gradient) {
    if (!c.model.is_plain_heat()) violation("the gradient monitor requires the plain-heat equation");
    if (!(f0.min() > 0.0 && f0.max() < 1.0)) violation("the gradient monitor requires 0 < f < 1 initially");
  }
  for (const ActionPair& p : c.pairs) {
    if (p.node1 >= grid.size() || p.node2 >= grid.size()) violation("action.pair node outside the grid");
    if (!(p.t1 < p.t2)) violation("action.pair needs t1 < t2");
  }
}

inline ScenarioConfig parse_config(std::istream& in) {
  ScenarioConfig c;
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(ErrorKind::SyntaxError, "line " + std::to_string(line_no) + ": malformed section header");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::SyntaxError, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw Error(ErrorKind::SyntaxError, "line " + std::to_string(line_no) + ": empty key or value");
    }
    detail::apply(c, section, detail::ConfigLine(line_no, key, value));
  }
  finalize(c);
  return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace harnackflow
