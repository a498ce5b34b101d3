// tdscope command line: run a verification study or validate its config.

#include "tdscope/tdscope.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>

namespace {

unsigned env_threads() {
  const char* v = std::getenv("TDSCOPE_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096)
    throw tdscope::ConfigError(std::string("TDSCOPE_THREADS: expected a positive integer, got '") + v + "'");
  return static_cast<unsigned>(n);
}

int run(const std::string& path, const std::string& out, int threads, std::optional<std::uint64_t> seed) {
  tdscope::ExperimentConfig cfg = tdscope::parse_config(path);
  if (threads > 0) cfg.vie.threads = static_cast<unsigned>(threads);
  else if (const unsigned t = env_threads()) cfg.vie.threads = t;
  if (seed) cfg.seed = *seed;

  const auto t0 = std::chrono::steady_clock::now();
  const tdscope::StudyReport rep = tdscope::run_study(cfg, &std::cerr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto files = tdscope::emit_outputs(rep, out);

  for (const auto& c : rep.checks)
    std::cout << tdscope::to_string(c.status) << "  " << c.name << " = " << tdscope::detail::fmt_double(c.value)
              << "\n";
  std::cout << rep.name << ": " << tdscope::to_string(rep.status()) << "\n";
  for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
  std::cerr << "wall-clock " << secs << " s, threads " << cfg.vie.threads << "\n";
  return tdscope::exit_code(rep.status());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tdscope: topological-derivative imaging verification studies"};
  app.require_subcommand(1);

  std::string run_cfg, out = "out", val_cfg;
  int threads = 0;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "run the study described by a config file");
  run_cmd->add_option("config", run_cfg, "config path")->required();
  run_cmd->add_option("--out", out, "output directory")->capture_default_str();
  run_cmd->add_option("--threads", threads, "worker threads (fallback: TDSCOPE_THREADS)")
      ->check(CLI::PositiveNumber);
  auto* seed_opt = run_cmd->add_option("--seed", seed, "RNG seed, overrides study.seed");

  auto* val_cmd = app.add_subcommand("validate", "check a config file against the schema");
  val_cmd->add_option("config", val_cfg, "config path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*val_cmd) {
      const auto cfg = tdscope::parse_config(val_cfg);
      std::cout << val_cfg << ": valid " << cfg.study << " config\n";
      return 0;
    }
    std::optional<std::uint64_t> s;
    if (*seed_opt) s = seed;
    return run(run_cfg, out, threads, s);
  } catch (const tdscope::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const tdscope::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
  } catch (const tdscope::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << " (residual " << e.residual() << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
