// Command-line front end: run-single, run-gl, compare, verify.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "hfgl/config.hpp"
#include "hfgl/log.hpp"
#include "hfgl/output.hpp"
#include "hfgl/solver_gl.hpp"
#include "hfgl/solver_single.hpp"
#include "hfgl/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct RunArgs {
  std::string config;
  std::string out;
  bool quiet = false;
  int verbosity = 1;
};

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("config", a.config, "Run configuration file")->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--out", a.out, "Output directory (overrides output.dir)");
  sub->add_flag("-q,--quiet", a.quiet, "No progress output");
  sub->add_option("-v,--verbosity", a.verbosity, "0 silent, 1 per step, 2 solver detail")->check(CLI::Range(0, 2));
}

int run(const RunArgs& a, hfgl::SolverMode mode) {
  hfgl::RunConfig cfg = hfgl::load_config(a.config);
  cfg.mode = mode;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.quiet) cfg.quiet = true;
  hfgl::log_level() = cfg.quiet ? 0 : a.verbosity;
  const hfgl::TimeSeries ts = mode == hfgl::SolverMode::gl ? hfgl::run_gl(cfg) : hfgl::run_single(cfg);
  if (!cfg.quiet && !ts.rows.empty()) {
    const auto& last = ts.rows.back();
    std::printf("%zu steps, t = %.4g s, p_crack_max = %.6e GPa, dofs = %ld, output in %s\n", ts.rows.size(),
                last.t, last.p_crack_max, last.total_dofs, cfg.output_dir.c_str());
  }
  return kOk;
}

int compare(const std::string& a, const std::string& b, double tol) {
  const double diff = hfgl::max_relative_pressure_diff(hfgl::read_series_csv(a), hfgl::read_series_csv(b));
  std::printf("max relative pressure difference %.6e (tol %.6e)\n", diff, tol);
  return diff <= tol ? kOk : kFailure;
}

int verify() {
  bool all = true;
  for (const auto& r : hfgl::run_verify_suite()) {
    std::printf("%-4s %-62s %.3e < %.1e  %s  (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.value,
                r.tolerance, r.detail.c_str(), r.seconds);
    all = all && r.passed;
  }
  return all ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hydraulic phase-field fracture in poroelastic media, single-scale and global-local solvers"};
  app.require_subcommand(1);

  RunArgs single_args, gl_args;
  auto* single = app.add_subcommand("run-single", "Single-scale staggered solve of a configuration");
  add_run_options(single, single_args);
  auto* gl = app.add_subcommand("run-gl", "Global-local solve with adaptive local domain");
  add_run_options(gl, gl_args);

  std::string csv_a, csv_b;
  double tol = 0.0;
  auto* cmp = app.add_subcommand("compare", "Compare the pressure traces of two series.csv files");
  cmp->add_option("a", csv_a, "First series")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", csv_b, "Second series")->required()->check(CLI::ExistingFile);
  cmp->add_option("--tol", tol, "Allowed pointwise relative difference")->required()->check(CLI::NonNegativeNumber);

  auto* ver = app.add_subcommand("verify", "Run the invariant and oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::fputs(app.help().c_str(), stdout);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n\n%s", e.what(), app.help().c_str());
    return kUsage;
  }

  try {
    if (*single) return run(single_args, hfgl::SolverMode::single);
    if (*gl) return run(gl_args, hfgl::SolverMode::gl);
    if (*cmp) return compare(csv_a, csv_b, tol);
    if (*ver) return verify();
  } catch (const hfgl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  std::fputs(app.help().c_str(), stderr);
  return kUsage;
}
