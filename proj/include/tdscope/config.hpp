#pragma once

// Experiment configuration: INI files with a fixed, typed schema.

#include "tdscope/materials.hpp"
#include "tdscope/td.hpp"
#include "tdscope/voxel.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tdscope {

struct ShapeSpec {
  std::string kind = "ball";  // ball | ellipsoid | union (two balls)
  double radius = 0.5;
  Vec3 semi_axes = Vec3::Constant(0.5);
  Vec3 center = Vec3::Zero();
  // union: a second ball
  double radius2 = 0.0;
  Vec3 center2 = Vec3::Zero();

  Shape build() const {
    if (kind == "ball") return Shape::ball(radius, center);
    if (kind == "ellipsoid") return Shape::ellipsoid(semi_axes, center);
    return Shape::union_of({Shape::ball(radius, center), Shape::ball(radius2, center2)});
  }
};

struct ExperimentConfig {
  std::string path;
  // [study]
  std::string study = "sign";  // sign | decay | born | oracle | delta | static
  std::string name;
  std::uint64_t seed = 1;
  // [background]
  SymTensor3 A = SymTensor3::isotropic(1.0);
  double kappa = 1.0;
  // [scatterer]
  ShapeSpec shape;
  SymTensor3 A_tilde = SymTensor3::isotropic(2.0);
  double h = 0.0;  // 0: diam / 20
  // [surface]
  double source_radius = 5.0;
  double measurement_radius = 5.0;
  Vec3 surface_center = Vec3::Zero();
  int order = 40;
  std::optional<double> aperture;  // cap half-angle of the outer sphere, radians
  // [trial]
  SymTensor3 A_z = SymTensor3::isotropic(2.0);
  std::string trial_shape = "ball";  // ball | ellipsoid
  Vec3 trial_semi_axes = Vec3::Ones();
  std::string polarization = "closed";  // closed | quadrature
  int trial_cells = 20;                  // cells across the unit trial shape (quadrature)
  // [grid]
  Vec3 grid_lo = Vec3::Constant(-1.0);
  Vec3 grid_hi = Vec3::Constant(1.0);
  std::array<int, 3> grid_n{9, 9, 9};
  // [kernel]
  KernelMode kernel = KernelMode::quadrature;
  std::string formula = "auto";  // auto | iso | aniso_iso | general | direct
  // [decay]
  double eta = 0.01;
  double alpha = 0.5;
  std::vector<double> compare_alphas;
  double kappa_d = 0.0;  // kappa * d_z per alpha; 0 keeps the background kappa
  int rays = 3;
  int points = 12;
  int average_nodes = 8;
  // [born]
  double q0 = 0.4;
  int levels = 3;
  double exhibit_a_tilde = 3.0;
  // [delta]
  Vec3 z = Vec3(1.2, 0.0, 0.0);
  std::vector<double> delta_fractions{0.2, 0.1, 0.05};
  int cells_across = 6;
  int nmax = -1;  // -1: ceil(kappa R) + 20
  // [static]
  double interior_fraction = 0.5;
  // [tolerances] overrides, by check name
  std::map<std::string, double> tolerances;
  // [vie]
  VieOptions vie;

  double h_or_default() const { return h > 0.0 ? h : shape.build().diameter() / 20.0; }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double x;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + tok + "' is not a number");
    }
    if (used != tok.size()) throw ConfigError(key + ": '" + tok + "' is not a number");
    out.push_back(x);
  }
  return out;
}

inline double parse_number(const std::string& key, const std::string& v) {
  const auto n = parse_numbers(key, v);
  if (n.size() != 1) throw ConfigError(key + ": expected one number");
  return n[0];
}

inline Vec3 parse_vec3(const std::string& key, const std::string& v) {
  const auto n = parse_numbers(key, v);
  if (n.size() != 3) throw ConfigError(key + ": expected three numbers");
  return Vec3(n[0], n[1], n[2]);
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double x = parse_number(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(key + ": expected an integer");
  return static_cast<int>(x);
}

// Tensor from either a scalar key or a six-entry key (xx yy zz xy xz yz).
inline std::optional<SymTensor3> parse_tensor(const std::string& key, const std::string& v) {
  const auto n = parse_numbers(key, v);
  if (n.size() == 1) return SymTensor3::isotropic(n[0]);
  if (n.size() == 3) return SymTensor3::diagonal(n[0], n[1], n[2]);
  if (n.size() == 6) return SymTensor3(n[0], n[1], n[2], n[3], n[4], n[5]);
  throw ConfigError(key + ": expected 1, 3 or 6 numbers");
}

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"study", {"type", "name", "seed"}},
      {"background", {"a", "A", "kappa"}},
      {"scatterer", {"shape", "radius", "semi_axes", "center", "radius2", "center2", "a_tilde",
                     "A_tilde", "h"}},
      {"surface", {"source_radius", "measurement_radius", "radius", "center", "order", "aperture"}},
      {"trial", {"a_z", "beta_z", "A_z", "shape", "semi_axes", "polarization", "cells"}},
      {"grid", {"lo", "hi", "n"}},
      {"kernel", {"mode", "formula"}},
      {"decay", {"eta", "alpha", "compare_alphas", "kappa_d", "rays", "points", "average_nodes"}},
      {"born", {"q0", "levels", "exhibit_a_tilde"}},
      {"delta", {"z", "fractions", "cells_across", "nmax"}},
      {"static", {"interior_fraction"}},
      {"tolerances", {}},
      {"vie", {"threads", "max_voxels", "dense_limit", "gmres_tol", "gmres_restart",
               "gmres_max_iter", "self_term", "near_cells"}},
  };
  return s;
}

// Check names whose bounds a [tolerances] section may override. Range checks
// take name_lo / name_hi.
inline const std::map<std::string, std::set<std::string>>& tolerance_keys() {
  static const std::map<std::string, std::set<std::string>> k{
      {"sign", {"certificate", "sign_tally"}},
      {"decay", {"slope_lo", "slope_hi", "alpha_gap"}},
      {"born", {"born_ratio_lo", "born_ratio_hi", "exhibit_certificate", "exhibit_born_error"}},
      {"oracle", {"G_imag", "L_series", "L_origin", "G_from_L", "farfield", "asymptotic",
                  "cap_identity", "E_identity", "E_unimodular", "reciprocity"}},
      {"delta", {"delta_ratio", "delta_monotone"}},
      {"static", {"eshelby", "static_factor", "R0_norm_lo", "R0_norm_hi", "mz_ball_ellipsoid",
                  "mz_general", "mz_closed_form"}},
  };
  return k;
}

}  // namespace detail

/// Parses and validates a configuration. Unknown sections or keys are errors.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& path = "<string>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  c.path = path;
  const auto& schema = detail::config_schema();
  for (const auto& [sec, body] : tree) {
    auto it = schema.find(sec);
    if (it == schema.end() || body.empty())
      throw ConfigError(path + ": unknown section [" + sec + "]");
    if (sec == "tolerances") continue;
    for (const auto& [key, val] : body)
      if (!it->second.count(key)) throw ConfigError(path + ": unknown key " + sec + "." + key);
  }
  auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(sec + "." + key, '.')))
      return *v;
    return std::nullopt;
  };
  auto num = [&](const std::string& sec, const std::string& key, double& dst) {
    if (auto v = get(sec, key)) dst = detail::parse_number(sec + "." + key, *v);
  };
  auto integer = [&](const std::string& sec, const std::string& key, int& dst) {
    if (auto v = get(sec, key)) dst = detail::parse_int(sec + "." + key, *v);
  };
  auto vec = [&](const std::string& sec, const std::string& key, Vec3& dst) {
    if (auto v = get(sec, key)) dst = detail::parse_vec3(sec + "." + key, *v);
  };
  auto tensor = [&](const std::string& sec, const std::string& scalar, const std::string& full,
                    SymTensor3& dst) {
    auto s = get(sec, scalar);
    auto f = get(sec, full);
    if (s && f) throw ConfigError(path + ": give either " + sec + "." + scalar + " or " + sec + "." + full);
    if (s) dst = SymTensor3::isotropic(detail::parse_number(sec + "." + scalar, *s));
    if (f) dst = *detail::parse_tensor(sec + "." + full, *f);
  };

  if (auto v = get("study", "type")) c.study = *v;
  if (auto v = get("study", "name")) c.name = *v;
  if (auto v = get("study", "seed")) {
    const double s = detail::parse_number("study.seed", *v);
    if (s < 0 || s != std::floor(s)) throw ConfigError("study.seed: expected a non-negative integer");
    c.seed = static_cast<std::uint64_t>(s);
  }
  static const std::set<std::string> studies{"sign", "decay", "born", "oracle", "delta", "static"};
  if (!studies.count(c.study)) throw ConfigError(path + ": unknown study type '" + c.study + "'");

  tensor("background", "a", "A", c.A);
  num("background", "kappa", c.kappa);

  if (auto v = get("scatterer", "shape")) c.shape.kind = *v;
  if (c.shape.kind != "ball" && c.shape.kind != "ellipsoid" && c.shape.kind != "union")
    throw ConfigError("scatterer.shape: expected ball, ellipsoid or union");
  num("scatterer", "radius", c.shape.radius);
  vec("scatterer", "semi_axes", c.shape.semi_axes);
  vec("scatterer", "center", c.shape.center);
  num("scatterer", "radius2", c.shape.radius2);
  vec("scatterer", "center2", c.shape.center2);
  tensor("scatterer", "a_tilde", "A_tilde", c.A_tilde);
  num("scatterer", "h", c.h);

  if (auto v = get("surface", "radius")) {
    c.source_radius = c.measurement_radius = detail::parse_number("surface.radius", *v);
    if (get("surface", "source_radius") || get("surface", "measurement_radius"))
      throw ConfigError("surface.radius: conflicts with source_radius / measurement_radius");
  }
  num("surface", "source_radius", c.source_radius);
  num("surface", "measurement_radius", c.measurement_radius);
  vec("surface", "center", c.surface_center);
  integer("surface", "order", c.order);
  if (auto v = get("surface", "aperture")) c.aperture = detail::parse_number("surface.aperture", *v);

  {
    auto az = get("trial", "a_z");
    auto bz = get("trial", "beta_z");
    if (az && bz) throw ConfigError("trial: give either a_z or beta_z");
    if (bz) {
      const double beta = detail::parse_number("trial.beta_z", *bz);
      if (!(beta > -1.0)) throw ConfigError("trial.beta_z: must be > -1");
      if (!c.A.is_isotropic()) throw ConfigError("trial.beta_z: requires an isotropic background");
      c.A_z = SymTensor3::isotropic(c.A.matrix()(0, 0) * (1.0 + beta));
    }
    tensor("trial", "a_z", "A_z", c.A_z);
  }
  if (auto v = get("trial", "shape")) c.trial_shape = *v;
  if (c.trial_shape != "ball" && c.trial_shape != "ellipsoid")
    throw ConfigError("trial.shape: expected ball or ellipsoid");
  vec("trial", "semi_axes", c.trial_semi_axes);
  if (auto v = get("trial", "polarization")) c.polarization = *v;
  if (c.polarization != "closed" && c.polarization != "quadrature")
    throw ConfigError("trial.polarization: expected closed or quadrature");
  integer("trial", "cells", c.trial_cells);

  vec("grid", "lo", c.grid_lo);
  vec("grid", "hi", c.grid_hi);
  if (auto v = get("grid", "n")) {
    const auto n = detail::parse_numbers("grid.n", *v);
    if (n.size() == 1) c.grid_n = {int(n[0]), int(n[0]), int(n[0])};
    else if (n.size() == 3) c.grid_n = {int(n[0]), int(n[1]), int(n[2])};
    else throw ConfigError("grid.n: expected 1 or 3 integers");
  }

  if (auto v = get("kernel", "mode")) {
    if (*v == "quadrature") c.kernel = KernelMode::quadrature;
    else if (*v == "farfield") c.kernel = KernelMode::farfield;
    else if (*v == "asymptotic") c.kernel = KernelMode::asymptotic;
    else throw ConfigError("kernel.mode: expected quadrature, farfield or asymptotic");
  }
  if (auto v = get("kernel", "formula")) c.formula = *v;
  static const std::set<std::string> formulas{"auto", "iso", "aniso_iso", "general", "direct"};
  if (!formulas.count(c.formula)) throw ConfigError("kernel.formula: unknown formula '" + c.formula + "'");

  num("decay", "eta", c.eta);
  num("decay", "alpha", c.alpha);
  if (auto v = get("decay", "compare_alphas")) c.compare_alphas = detail::parse_numbers("decay.compare_alphas", *v);
  num("decay", "kappa_d", c.kappa_d);
  integer("decay", "rays", c.rays);
  integer("decay", "points", c.points);
  integer("decay", "average_nodes", c.average_nodes);

  num("born", "q0", c.q0);
  integer("born", "levels", c.levels);
  num("born", "exhibit_a_tilde", c.exhibit_a_tilde);

  vec("delta", "z", c.z);
  if (auto v = get("delta", "fractions")) c.delta_fractions = detail::parse_numbers("delta.fractions", *v);
  integer("delta", "cells_across", c.cells_across);
  integer("delta", "nmax", c.nmax);

  num("static", "interior_fraction", c.interior_fraction);

  if (auto t = tree.get_child_optional("tolerances"))
    for (const auto& [key, val] : *t) {
      const auto& known = detail::tolerance_keys().at(c.study);
      if (!known.count(key))
        throw ConfigError(path + ": unknown tolerance '" + key + "' for a " + c.study + " study");
      c.tolerances[key] = detail::parse_number("tolerances." + key, val.data());
    }

  {
    int threads = static_cast<int>(c.vie.threads);
    integer("vie", "threads", threads);
    if (threads < 1) throw ConfigError("vie.threads: must be >= 1");
    c.vie.threads = static_cast<unsigned>(threads);
    int mv = static_cast<int>(c.vie.max_voxels), dl = static_cast<int>(c.vie.dense_limit);
    integer("vie", "max_voxels", mv);
    integer("vie", "dense_limit", dl);
    if (mv < 1 || dl < 0) throw ConfigError("vie: max_voxels must be >= 1 and dense_limit >= 0");
    c.vie.max_voxels = static_cast<std::size_t>(mv);
    c.vie.dense_limit = static_cast<std::size_t>(dl);
    num("vie", "gmres_tol", c.vie.gmres_tol);
    integer("vie", "gmres_restart", c.vie.gmres_restart);
    integer("vie", "gmres_max_iter", c.vie.gmres_max_iter);
    integer("vie", "near_cells", c.vie.near_cells);
    if (auto v = get("vie", "self_term")) {
      if (*v == "cube") c.vie.self_model = SelfTermModel::cube;
      else if (*v == "ball") c.vie.self_model = SelfTermModel::ball;
      else throw ConfigError("vie.self_term: expected cube or ball");
    }
  }

  // Semantic checks.
  auto spd = [&](const SymTensor3& t, const char* what) {
    if (!t.is_positive_definite()) throw ConfigError(std::string(what) + ": tensor must be positive definite");
  };
  spd(c.A, "background.A");
  spd(c.A_tilde, "scatterer.A_tilde");
  spd(c.A_z, "trial.A_z");
  if (!(c.kappa >= 0.0)) throw ConfigError("background.kappa: must be >= 0");
  if (!(c.shape.radius > 0.0) || !(c.shape.semi_axes.minCoeff() > 0.0))
    throw ConfigError("scatterer: radius and semi-axes must be positive");
  if (c.shape.kind == "union" && !(c.shape.radius2 > 0.0))
    throw ConfigError("scatterer.radius2: required and positive for a union");
  if (c.h < 0.0) throw ConfigError("scatterer.h: must be positive");
  if (!(c.source_radius > 0.0) || !(c.measurement_radius > 0.0))
    throw ConfigError("surface: radii must be positive");
  if (c.order < 1) throw ConfigError("surface.order: must be >= 1");
  if (c.aperture && (!(*c.aperture > 0.0) || *c.aperture > pi))
    throw ConfigError("surface.aperture: must lie in (0, pi]");
  for (int d = 0; d < 3; ++d)
    if (c.grid_n[d] < 1 || c.grid_hi(d) < c.grid_lo(d)) throw ConfigError("grid: bad extent");
  if (c.study == "decay") {
    if (!(c.eta > 0.0 && c.eta <= 0.1)) throw ConfigError("decay.eta: must lie in (0, 0.1]");
    auto alpha_ok = [](double a) { return a > 0.0 && a < 1.0; };
    if (!alpha_ok(c.alpha)) throw ConfigError("decay.alpha: must lie in (0, 1)");
    for (double a : c.compare_alphas)
      if (!alpha_ok(a)) throw ConfigError("decay.compare_alphas: values must lie in (0, 1)");
    if (c.kappa_d < 0.0) throw ConfigError("decay.kappa_d: must be >= 0");
    if (c.rays < 1 || c.points < 8 || c.average_nodes < 1)
      throw ConfigError("decay: need rays >= 1, points >= 8 and average_nodes >= 1");
    if (c.shape.kind != "ball") throw ConfigError("decay: requires a ball scatterer");
  }
  if (c.study == "born" && (!(std::abs(c.q0) < 1.0) || c.levels < 2))
    throw ConfigError("born: q0 must lie in (-1, 1) and levels >= 2");
  if (c.study == "static" && c.kappa != 0.0) throw ConfigError("static: background.kappa must be 0");
  if ((c.study == "static" || c.study == "born") &&
      (!c.A.is_isotropic() || !c.A_tilde.is_isotropic() || !c.A_z.is_isotropic()))
    throw ConfigError(c.study + ": requires isotropic background, scatterer and trial");
  if (c.study == "oracle" && !(c.A == SymTensor3::isotropic(1.0)))
    throw ConfigError("oracle: the closed-form kernels require background.a = 1");
  if (c.study == "oracle" && !(c.kappa > 0.0)) throw ConfigError("oracle: background.kappa must be > 0");
  if (c.study == "delta") {
    if (c.delta_fractions.empty()) throw ConfigError("delta.fractions: empty");
    for (double f : c.delta_fractions)
      if (!(f > 0.0)) throw ConfigError("delta.fractions: must be positive");
  }
  if (c.study == "sign" || c.study == "delta") {
    // Nesting: both surfaces surround B.
    const Shape s = c.shape.build();
    const auto box = s.bounding_box();
    const double reach = std::max((box[0] - c.surface_center).norm(), (box[1] - c.surface_center).norm());
    if (!(std::min(c.source_radius, c.measurement_radius) > reach))
      throw ConfigError("surface: both spheres must surround the scatterer");
  }
  return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace tdscope
