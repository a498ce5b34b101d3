#pragma once

// Study reports: named checks with their tolerances, the JSON document and
// the CSV artefacts.

#include "tdscope/config.hpp"
#include "tdscope/td.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace tdscope {

inline constexpr const char* version = "0.1.0";

enum class Status { PASS, FAIL, INCONCLUSIVE, NEUTRAL };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::PASS: return "PASS";
    case Status::FAIL: return "FAIL";
    case Status::INCONCLUSIVE: return "INCONCLUSIVE";
    case Status::NEUTRAL: return "NEUTRAL";
  }
  return "?";
}

/// 0 PASS / NEUTRAL, 2 FAIL, 3 INCONCLUSIVE.
inline int exit_code(Status s) {
  switch (s) {
    case Status::PASS:
    case Status::NEUTRAL: return 0;
    case Status::FAIL: return 2;
    case Status::INCONCLUSIVE: return 3;
  }
  return 1;
}

struct Check {
  std::string name;
  double value = 0.0;
  std::string op;  // "<", "<=", ">", ">=", "in"
  double lo = 0.0, hi = 0.0;
  Status status = Status::PASS;
  bool overridden = false;

  bool passed() const { return status == Status::PASS; }
};

/// A decay ray for the plot-ready CSV.
struct RaySeries {
  std::string file;
  std::vector<double> dist;
  std::vector<double> absT;
};

struct StudyReport {
  std::string study;
  std::string name;
  nlohmann::ordered_json config;
  nlohmann::ordered_json dimensionless = nlohmann::ordered_json::object();
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
  std::vector<Check> checks;
  bool neutral = false;
  std::optional<TdMap> map;
  std::vector<RaySeries> rays;

  const Check* find(const std::string& n) const {
    for (const auto& c : checks)
      if (c.name == n) return &c;
    return nullptr;
  }

  /// FAIL beats INCONCLUSIVE beats PASS; an all-zero study is NEUTRAL.
  Status status() const {
    bool inconclusive = false;
    for (const auto& c : checks) {
      if (c.status == Status::FAIL) return Status::FAIL;
      if (c.status == Status::INCONCLUSIVE) inconclusive = true;
    }
    if (inconclusive) return Status::INCONCLUSIVE;
    return neutral ? Status::NEUTRAL : Status::PASS;
  }
};

/// Builds checks, applying tolerance overrides from the configuration.
class CheckBook {
 public:
  CheckBook(StudyReport& rep, const std::map<std::string, double>& tol) : rep_(rep), tol_(tol) {}

  // `key` names the tolerance override; it defaults to the check name.
  Check& less(const std::string& name, double value, double bound, bool strict = true,
              const std::string& key = "") {
    const double b = pick(key.empty() ? name : key, bound);
    return add({name, value, strict ? "<" : "<=", 0.0, b, verdict(strict ? value < b : value <= b), over_});
  }
  Check& greater(const std::string& name, double value, double bound, bool strict = true,
                 const std::string& key = "") {
    const double b = pick(key.empty() ? name : key, bound);
    return add({name, value, strict ? ">" : ">=", b, 0.0, verdict(strict ? value > b : value >= b), over_});
  }
  Check& within(const std::string& name, double value, double lo, double hi,
                const std::string& key = "") {
    const std::string k = key.empty() ? name : key;
    const double l = pick(k + "_lo", lo);
    const bool o1 = over_;
    const double h = pick(k + "_hi", hi);
    const bool o2 = over_;
    return add({name, value, "in", l, h, verdict(value >= l && value <= h), o1 || o2});
  }

 private:
  static Status verdict(bool ok) { return ok ? Status::PASS : Status::FAIL; }
  double pick(const std::string& key, double def) {
    over_ = false;
    auto it = tol_.find(key);
    if (it == tol_.end()) return def;
    over_ = true;
    rep_.overrides[key] = {{"default", def}, {"value", it->second}};
    return it->second;
  }
  Check& add(Check c) {
    rep_.checks.push_back(std::move(c));
    return rep_.checks.back();
  }

  StudyReport& rep_;
  const std::map<std::string, double>& tol_;
  bool over_ = false;
};

// ---------------------------------------------------------------------------
// Serialisation

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline nlohmann::ordered_json vec_json(const Vec3& v) { return {v(0), v(1), v(2)}; }

inline nlohmann::ordered_json tensor_json(const SymTensor3& t) {
  const auto& e = t.entries();
  return {e[0], e[1], e[2], e[3], e[4], e[5]};
}

}  // namespace detail

/// Parsed configuration echoed into the report (file path as given).
inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  using J = nlohmann::ordered_json;
  J j;
  j["path"] = std::filesystem::path(c.path).filename().string();
  j["study"] = c.study;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["background"] = {{"A", detail::tensor_json(c.A)}, {"kappa", c.kappa}};
  J s = {{"shape", c.shape.kind}, {"center", detail::vec_json(c.shape.center)}};
  if (c.shape.kind == "ellipsoid") s["semi_axes"] = detail::vec_json(c.shape.semi_axes);
  else s["radius"] = c.shape.radius;
  if (c.shape.kind == "union") {
    s["radius2"] = c.shape.radius2;
    s["center2"] = detail::vec_json(c.shape.center2);
  }
  s["A_tilde"] = detail::tensor_json(c.A_tilde);
  s["h"] = c.h_or_default();
  j["scatterer"] = s;
  j["surface"] = {{"source_radius", c.source_radius},
                  {"measurement_radius", c.measurement_radius},
                  {"center", detail::vec_json(c.surface_center)},
                  {"order", c.order},
                  {"aperture", c.aperture ? J(*c.aperture) : J(nullptr)}};
  j["trial"] = {{"A_z", detail::tensor_json(c.A_z)},
                {"shape", c.trial_shape},
                {"semi_axes", detail::vec_json(c.trial_semi_axes)},
                {"polarization", c.polarization},
                {"cells", c.trial_cells}};
  j["kernel"] = {{"mode", to_string(c.kernel)}, {"formula", c.formula}};
  if (c.study == "sign")
    j["grid"] = {{"lo", detail::vec_json(c.grid_lo)},
                 {"hi", detail::vec_json(c.grid_hi)},
                 {"n", {c.grid_n[0], c.grid_n[1], c.grid_n[2]}}};
  if (c.study == "decay" || c.study == "oracle")
    j["decay"] = {{"eta", c.eta}, {"alpha", c.alpha}, {"compare_alphas", c.compare_alphas},
                  {"kappa_d", c.kappa_d}, {"rays", c.rays}, {"points", c.points},
                  {"average_nodes", c.average_nodes}};
  if (c.study == "born")
    j["born"] = {{"q0", c.q0}, {"levels", c.levels}, {"exhibit_a_tilde", c.exhibit_a_tilde}};
  if (c.study == "delta")
    j["delta"] = {{"z", detail::vec_json(c.z)}, {"fractions", c.delta_fractions},
                  {"cells_across", c.cells_across}, {"nmax", c.nmax}};
  if (c.study == "static") j["static"] = {{"interior_fraction", c.interior_fraction}};
  j["vie"] = {{"self_term", c.vie.self_model == SelfTermModel::cube ? "cube" : "ball"},
              {"near_cells", c.vie.near_cells},
              {"max_voxels", c.vie.max_voxels},
              {"dense_limit", c.vie.dense_limit},
              {"gmres_tol", c.vie.gmres_tol},
              {"gmres_restart", c.vie.gmres_restart},
              {"gmres_max_iter", c.vie.gmres_max_iter}};
  return j;
}

inline nlohmann::ordered_json check_json(const Check& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["value"] = c.value;
  j["op"] = c.op;
  if (c.op == "in") j["bounds"] = {c.lo, c.hi};
  else if (c.op[0] == '<') j["bound"] = c.hi;
  else j["bound"] = c.lo;
  j["overridden"] = c.overridden;
  j["status"] = to_string(c.status);
  return j;
}

/// Report document. Wall-clock is deliberately absent so that reruns are
/// byte-identical.
inline nlohmann::ordered_json report_json(const StudyReport& r) {
  nlohmann::ordered_json j;
  j["tool"] = "tdscope";
  j["version"] = version;
  j["study"] = r.study;
  j["name"] = r.name;
  j["status"] = to_string(r.status());
  j["config"] = r.config;
  j["dimensionless"] = r.dimensionless;
  j["tolerance_overrides"] = r.overrides;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) checks.push_back(check_json(c));
  j["checks"] = checks;
  j["results"] = r.results;
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  if (r.map) out.push_back("td_map.csv");
  for (const auto& ray : r.rays) out.push_back(ray.file);
  out.push_back("report.json");
  j["outputs"] = out;
  return j;
}

inline void write_td_csv(std::ostream& os, const TdMap& m) {
  os << "x,y,z,T,inside_B\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Vec3& p = m.points[i];
    os << detail::fmt_double(p(0)) << ',' << detail::fmt_double(p(1)) << ','
       << detail::fmt_double(p(2)) << ',' << detail::fmt_double(m.values[i]) << ','
       << (m.inside_B[i] ? 1 : 0) << '\n';
  }
}

inline void write_ray_csv(std::ostream& os, const RaySeries& r) {
  os << "dist,absT\n";
  for (std::size_t i = 0; i < r.dist.size(); ++i)
    os << detail::fmt_double(r.dist[i]) << ',' << detail::fmt_double(r.absT[i]) << '\n';
}

namespace detail {

template <class W>
void write_file(const std::filesystem::path& p, W&& writer) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + p.string());
  writer(os);
  os.flush();
  if (!os) throw IoError("write failed: " + p.string());
}

}  // namespace detail

/// Writes report.json, td_map.csv (if any) and the ray CSVs into dir.
inline std::vector<std::filesystem::path> emit_outputs(const StudyReport& r,
                                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  if (r.map) {
    written.push_back(dir / "td_map.csv");
    detail::write_file(written.back(), [&](std::ostream& os) { write_td_csv(os, *r.map); });
  }
  for (const auto& ray : r.rays) {
    written.push_back(dir / ray.file);
    detail::write_file(written.back(), [&](std::ostream& os) { write_ray_csv(os, ray); });
  }
  written.push_back(dir / "report.json");
  detail::write_file(written.back(), [&](std::ostream& os) { os << report_json(r).dump(2) << '\n'; });
  return written;
}

}  // namespace tdscope
