// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Studies run in-process on the shipped configs; the determinism criterion
// drives the command-line tool.

#include "tdscope/tdscope.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#ifndef TDSCOPE_CONFIG_DIR
#error "TDSCOPE_CONFIG_DIR must be defined"
#endif
#ifndef TDSCOPE_CLI
#error "TDSCOPE_CLI must be defined"
#endif

namespace fs = std::filesystem;
using namespace tdscope;

namespace {

struct Run {
  StudyReport rep;
  double seconds = 0.0;
};

std::map<std::string, Run> cache;

const Run& run(const std::string& name) {
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  ExperimentConfig cfg = parse_config(fs::path(TDSCOPE_CONFIG_DIR) / (name + ".ini"));
  cfg.vie.threads = 1;
  const auto t0 = std::chrono::steady_clock::now();
  Run r{run_study(cfg, &std::cerr), 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << name << ": " << to_string(r.rep.status()) << " in " << r.seconds << " s\n";
  return cache.emplace(name, std::move(r)).first->second;
}

// Collects the reasons a criterion fails.
struct Verdict {
  std::vector<std::string> why;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) why.push_back(what);
  }
  // The named check exists, passed, and was not loosened by an override.
  void check(const StudyReport& r, const std::string& name) {
    const Check* c = r.find(name);
    if (!c) {
      why.push_back(r.name + ": missing check " + name);
      return;
    }
    detail << ' ' << name << '=' << detail::fmt_double(c->value);
    require(c->passed(), r.name + ": " + name + " " + to_string(c->status));
    require(!c->overridden, r.name + ": " + name + " uses a tolerance override");
  }
};

int failures = 0;

void report(int id, const std::string& title, Verdict& v) {
  const bool ok = v.why.empty();
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << ". " << title << " |" << v.detail.str();
  for (const auto& w : v.why) std::cout << " [" << w << "]";
  std::cout << std::endl;
}

template <class F>
void criterion(int id, const std::string& title, F&& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.why.push_back(std::string("exception: ") + e.what());
  }
  report(id, title, v);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  criterion(1, "sign heuristic and sign flip", [](Verdict& v) {
    const Run& pos = run("sign");
    const Run& neg = run("sign_flip");
    v.check(pos.rep, "certificate");
    v.check(pos.rep, "sign_tally");
    v.check(neg.rep, "certificate");
    v.check(neg.rep, "sign_tally");
    v.require(pos.rep.map && pos.rep.map->size() == 729, "sign: expected a full 9^3 grid");
    v.require(neg.rep.map && neg.rep.map->size() == 729, "sign_flip: expected a full 9^3 grid");
    if (pos.rep.map && neg.rep.map) {
      std::size_t bad = 0;
      for (double t : pos.rep.map->values) bad += !(t < 0.0);
      for (double t : neg.rep.map->values) bad += !(t > 0.0);
      v.require(bad == 0, std::to_string(bad) + " samples with the wrong sign");
    }
    v.require(pos.rep.map && pos.rep.map->certificate < 1.0, "certificate not below 1");
    v.detail << " runtime=" << detail::fmt_double(pos.seconds) << "s";
    v.require(pos.seconds < 300.0, "sign runtime above 5 min");
  });

  criterion(2, "decay exponent and alpha agreement", [](Verdict& v) {
    const Run& d = run("decay");
    v.check(d.rep, "slope");
    v.check(d.rep, "alpha_gap");
    const double s = d.rep.find("slope") ? d.rep.find("slope")->value : 0.0;
    v.require(s >= -2.3 && s <= -1.7, "slope outside [-2.3, -1.7]");
    v.detail << " runtime=" << detail::fmt_double(d.seconds) << "s";
    v.require(d.seconds < 600.0, "decay runtime above 10 min");
  });

  criterion(3, "zero-frequency non-decay", [](Verdict& v) {
    const Run& d = run("decay_static");
    v.check(d.rep, "slope");
    const double s = d.rep.find("slope") ? d.rep.find("slope")->value : 1e9;
    v.require(s >= -0.3 && s <= 0.3, "slope outside [-0.3, 0.3]");
  });

  criterion(4, "kernel oracle suite", [](Verdict& v) {
    const Run& o = run("oracle");
    for (const char* n : {"G_imag", "L_series", "L_origin", "G_from_L", "farfield", "asymptotic"})
      v.check(o.rep, n);
    v.require(o.rep.results["farfield"]["kappa_R"].get<double>() == 500.0, "far field not at kappa R = 500");
    v.require(o.rep.results["asymptotic"]["eta"].get<double>() == 0.01, "asymptotic check not at eta = 0.01");
  });

  criterion(5, "operator E", [](Verdict& v) {
    const Run& o = run("oracle");
    v.check(o.rep, "E_identity");
    v.check(o.rep, "E_unimodular");
  });

  criterion(6, "static physics", [](Verdict& v) {
    const Run& s = run("static");
    v.check(s.rep, "static_factor");
    v.check(s.rep, "eshelby");
    v.check(s.rep, "R0_norm");
  });

  criterion(7, "polarization three-way agreement", [](Verdict& v) {
    const Run& s = run("static");
    v.check(s.rep, "mz_ball_ellipsoid");
    v.check(s.rep, "mz_general");
    v.check(s.rep, "mz_closed_form");
    v.require(mz_ball_iso(1.0, 1.0).M == pi * Mat3::Identity(), "M_z(1, 1) is not pi I");
  });

  criterion(8, "reciprocity", [](Verdict& v) {
    const Run& o = run("oracle");
    v.check(o.rep, "reciprocity");
    v.require(o.rep.results["reciprocity"]["pairs"].get<int>() == 10, "expected 10 pairs");
  });

  criterion(9, "finite-delta expansion", [](Verdict& v) {
    const Run& d = run("delta");
    v.check(d.rep, "delta_ratio");
    v.check(d.rep, "delta_monotone");
    v.detail << " runtime=" << detail::fmt_double(d.seconds) << "s";
    v.require(d.seconds < 900.0, "delta runtime above 15 min");
  });

  criterion(10, "Born versus moderate regime", [](Verdict& v) {
    const Run& b = run("born");
    v.check(b.rep, "exhibit_certificate");
    v.check(b.rep, "exhibit_born_error");
    int ratios = 0;
    for (const auto& c : b.rep.checks)
      if (c.name.rfind("born_ratio_", 0) == 0) {
        v.check(b.rep, c.name);
        ++ratios;
      }
    v.require(ratios >= 1, "no halving ratio reported");
  });

  criterion(11, "determinism of the command-line outputs", [](Verdict& v) {
    const fs::path base = fs::temp_directory_path() / "tdscope_acceptance";
    fs::remove_all(base);
    for (const char* cfg : {"sign_small", "decay_static"}) {
      std::vector<fs::path> dirs;
      for (int rep = 0; rep < 2; ++rep) {
        const fs::path out = base / (std::string(cfg) + "_" + std::to_string(rep));
        const std::string cmd = std::string("\"") + TDSCOPE_CLI + "\" run \"" +
                                (fs::path(TDSCOPE_CONFIG_DIR) / (std::string(cfg) + ".ini")).string() +
                                "\" --out \"" + out.string() + "\" --threads 1 > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        v.require(rc == 0, std::string(cfg) + ": CLI exit status " + std::to_string(rc));
        dirs.push_back(out);
      }
      std::size_t files = 0;
      for (const auto& e : fs::directory_iterator(dirs[0])) {
        ++files;
        const fs::path other = dirs[1] / e.path().filename();
        v.require(fs::exists(other) && slurp(e.path()) == slurp(other),
                  std::string(cfg) + ": " + e.path().filename().string() + " differs");
      }
      std::size_t files2 = 0;
      for ([[maybe_unused]] const auto& e : fs::directory_iterator(dirs[1])) ++files2;
      v.require(files > 0 && files == files2, std::string(cfg) + ": output file sets differ");
      v.detail << ' ' << cfg << ':' << files << "files";
    }
    fs::remove_all(base);
  });

  std::cout << (failures ? "acceptance: FAIL" : "acceptance: PASS") << " (" << 11 - failures << "/11)\n";
  return failures ? 1 : 0;
}
