#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "choquard/io.hpp"
#include "choquard/multibump.hpp"
#include "choquard/soliton_ode.hpp"

namespace choquard {

using Config = boost::property_tree::ptree;

/// Reads an INI file: [section] headers, key = value lines, ';' or '#' comments.
inline Config read_config(const std::string& path) {
  Config c;
  try {
    boost::property_tree::ini_parser::read_ini(path, c);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline Config parse_config(const std::string& text) {
  std::istringstream in(text);
  Config c;
  try {
    boost::property_tree::ini_parser::read_ini(in, c);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

namespace cfg {

/// Whitespace- or comma-separated numbers.
inline std::vector<double> numbers(const std::string& text, const std::string& key) {
  std::string s = text;
  for (char& c : s)
    if (c == ',' || c == ';') c = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + tok + "' for " + key);
    }
  }
  return out;
}

inline std::optional<std::string> text(const Config& c, const std::string& key) {
  if (auto v = c.get_optional<std::string>(key)) return *v;
  return std::nullopt;
}

inline double number(const Config& c, const std::string& key, std::optional<double> fallback = std::nullopt) {
  const auto t = text(c, key);
  if (!t) {
    if (fallback) return *fallback;
    throw ConfigError("missing config key " + key);
  }
  const auto v = numbers(*t, key);
  if (v.size() != 1) throw ConfigError(key + " must be a single number");
  return v[0];
}

inline int integer(const Config& c, const std::string& key, std::optional<int> fallback = std::nullopt) {
  const double v = number(c, key, fallback ? std::optional<double>(*fallback) : std::nullopt);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + " must be an integer");
  return static_cast<int>(v);
}

inline Vec3 vec3(const Config& c, const std::string& key, std::optional<Vec3> fallback = std::nullopt) {
  const auto t = text(c, key);
  if (!t) {
    if (fallback) return *fallback;
    throw ConfigError("missing config key " + key);
  }
  const auto v = numbers(*t, key);
  if (v.size() != 3) throw ConfigError(key + " must have 3 components");
  return {v[0], v[1], v[2]};
}

inline std::array<Vec3, 3> matrix(const Config& c, const std::string& key) {
  const auto t = text(c, key);
  if (!t) throw ConfigError("missing config key " + key);
  const auto v = numbers(*t, key);
  if (v.size() != 9) throw ConfigError(key + " must have 9 entries (row-major)");
  return {Vec3{v[0], v[1], v[2]}, Vec3{v[3], v[4], v[5]}, Vec3{v[6], v[7], v[8]}};
}

/// Sections named prefix0, prefix1, ... in order, stopping at the first gap.
inline std::vector<std::string> indexed_sections(const Config& c, const std::string& prefix) {
  std::vector<std::string> out;
  for (int i = 0;; ++i) {
    const std::string name = prefix + std::to_string(i);
    if (!c.get_child_optional(name)) break;
    out.push_back(name);
  }
  return out;
}

}  // namespace cfg

/// coulomb | inverse_distance | axis_quadratic:<axis> | anisotropic:<axis>:<c> | table:<file>
inline KernelSpec parse_kernel_spec(const std::string& s) {
  if (s == "coulomb") return CoulombSpec{};
  if (s == "inverse_distance") return inverse_distance_table();
  if (s.rfind("table:", 0) == 0) return read_kernel_table(s.substr(6));
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto axis_of = [&](const std::string& p) {
    if (p != "0" && p != "1" && p != "2") throw ConfigError("kernel axis must be 0, 1 or 2 in '" + s + "'");
    return p[0] - '0';
  };
  if (parts.size() == 2 && parts[0] == "axis_quadratic") return axis_quadratic_table(axis_of(parts[1]));
  if (parts.size() == 3 && parts[0] == "anisotropic")
    return anisotropic_table(axis_of(parts[1]), cfg::numbers(parts[2], "anisotropic strength").at(0));
  throw ConfigError("unknown kernel '" + s + "'");
}

// ---------------------------------------------------------------------------
// Multi-bump configuration.
//
//   [potential]  base, m_tilde, mu (6), beta, zero_set = "x y z; x y z",
//                optional delta (checked against the computed value)
//   [well0] ...  center, shape = quadratic|gaussian, strength, width,
//                region = ball|box, radius | half, optional m (checked),
//                optional phase (bump phase, default 0)
//   [vector_potential]  A0 (default 0), and either B (uniform field,
//                symmetric gauge) or M (9 entries, A = A0 + M x)
//   [grid] n, L     [solver] dt, tol, max_iter     [relax] steps, tau

inline Region parse_region(const Config& c, const std::string& sec, const Vec3& center) {
  const std::string kind = cfg::text(c, sec + ".region").value_or("ball");
  if (kind == "ball") return Region::ball(cfg::vec3(c, sec + ".region_center", center), cfg::number(c, sec + ".radius"));
  if (kind == "box") return Region::box(cfg::vec3(c, sec + ".region_center", center), cfg::vec3(c, sec + ".half"));
  throw ConfigError(sec + ".region must be ball or box");
}

struct MultibumpConfig {
  PotentialSpec potential;
  std::vector<double> phases;
  int n = 64;
  double L = 16.0;
  SolverParams solver;
  RelaxParams relax;
  KernelSpec kernel = CoulombSpec{};
  std::string kernel_name = "coulomb";
};

inline MultibumpConfig load_multibump(const Config& c) {
  MultibumpConfig m;
  PotentialSpec& p = m.potential;
  p.base = cfg::number(c, "potential.base");
  p.m_tilde = cfg::number(c, "potential.m_tilde");
  p.mu = cfg::number(c, "potential.mu", 6.0);
  p.beta = cfg::number(c, "potential.beta");
  if (auto z = cfg::text(c, "potential.zero_set")) {
    std::stringstream ss(*z);
    for (std::string pt; std::getline(ss, pt, ';');) {
      const auto v = cfg::numbers(pt, "potential.zero_set");
      if (v.empty()) continue;
      if (v.size() != 3) throw ConfigError("potential.zero_set entries need 3 components");
      p.zero_set.push_back({v[0], v[1], v[2]});
    }
  }
  const auto wells = cfg::indexed_sections(c, "well");
  if (wells.empty()) throw ConfigError("config declares no [well0] section");
  for (const std::string& sec : wells) {
    Well w;
    w.center = cfg::vec3(c, sec + ".center");
    const std::string shape = cfg::text(c, sec + ".shape").value_or("quadratic");
    if (shape == "quadratic")
      w.shape = WellShape::quadratic;
    else if (shape == "gaussian")
      w.shape = WellShape::gaussian;
    else
      throw ConfigError(sec + ".shape must be quadratic or gaussian");
    w.strength = cfg::number(c, sec + ".strength");
    w.width = cfg::number(c, sec + ".width", 1.0);
    w.region = parse_region(c, sec, w.center);
    p.wells.push_back(w);
    m.phases.push_back(cfg::number(c, sec + ".phase", 0.0));
  }
  if (c.get_child_optional("vector_potential")) {
    const bool hasB = cfg::text(c, "vector_potential.B").has_value();
    const bool hasM = cfg::text(c, "vector_potential.M").has_value();
    if (hasB && hasM) throw ConfigError("vector_potential takes B or M, not both");
    if (hasB) p.A = LinearVectorPotential::uniform_field(cfg::vec3(c, "vector_potential.B"));
    if (hasM) p.A.M = cfg::matrix(c, "vector_potential.M");
    p.A.A0 = cfg::vec3(c, "vector_potential.A0", Vec3{0, 0, 0});
  }
  validate(p);
  for (std::size_t i = 0; i < wells.size(); ++i)
    if (auto mi = cfg::text(c, wells[i] + ".m")) {
      const double want = cfg::numbers(*mi, wells[i] + ".m").at(0);
      if (std::abs(want - p.well_minimum(i)) > 1e-9 * std::max(1.0, want))
        throw ConfigError(wells[i] + ".m = " + *mi + " but V at the well center is " + std::to_string(p.well_minimum(i)));
    }
  if (auto d = cfg::text(c, "potential.delta")) {
    const double want = cfg::numbers(*d, "potential.delta").at(0);
    if (std::abs(want - p.delta()) > 1e-9 * std::max(1.0, want))
      throw ConfigError("potential.delta = " + *d + " but the geometry gives " + std::to_string(p.delta()));
  }
  m.n = cfg::integer(c, "grid.n", 64);
  m.L = cfg::number(c, "grid.L", 16.0);
  m.solver.dt = cfg::number(c, "solver.dt", 10.0);
  m.solver.tol = cfg::number(c, "solver.tol", m.solver.tol);
  m.solver.max_iter = cfg::integer(c, "solver.max_iter", m.solver.max_iter);
  m.relax.steps = cfg::integer(c, "relax.steps", m.relax.steps);
  m.relax.tau = cfg::number(c, "relax.tau", m.relax.tau);
  m.kernel_name = cfg::text(c, "kernel.name").value_or("coulomb");
  m.kernel = parse_kernel_spec(m.kernel_name);
  return m;
}

// ---------------------------------------------------------------------------
// ODE configuration.
//
//   [ode] eps, interaction = coulomb|none
//   [potential] type = zero|quadratic, H (9 entries), x0, c
//   [field] B (uniform)
//   [particle0] ... x, xi, m

struct OdeConfig {
  NewtonState state;
  ForceField field;
};

inline OdeConfig load_ode(const Config& c) {
  OdeConfig o;
  o.field.eps = cfg::number(c, "ode.eps", 0.0);
  const std::string inter = cfg::text(c, "ode.interaction").value_or("coulomb");
  if (inter == "none") {
    o.field.W = [](const Vec3&) { return 0.0; };
    o.field.gradW = [](const Vec3&) { return Vec3{0, 0, 0}; };
    o.field.singular_W = false;
  } else if (inter != "coulomb") {
    throw ConfigError("ode.interaction must be coulomb or none");
  }
  const std::string type = cfg::text(c, "potential.type").value_or("zero");
  if (type == "quadratic")
    set_quadratic_potential(o.field, cfg::matrix(c, "potential.H"), cfg::vec3(c, "potential.x0", Vec3{0, 0, 0}),
                            cfg::number(c, "potential.c", 0.0));
  else if (type != "zero")
    throw ConfigError("potential.type must be zero or quadratic");
  if (auto b = cfg::text(c, "field.B")) set_uniform_field(o.field, cfg::vec3(c, "field.B"));
  for (const std::string& sec : cfg::indexed_sections(c, "particle")) {
    o.state.x.push_back(cfg::vec3(c, sec + ".x"));
    o.state.xi.push_back(cfg::vec3(c, sec + ".xi", Vec3{0, 0, 0}));
    o.state.m.push_back(cfg::number(c, sec + ".m", 1.0));
  }
  validate(o.state);
  return o;
}

}  // namespace choquard
