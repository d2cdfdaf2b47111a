// hybridsim: command-line front end for the hybrid ensemble toolkit.
//
// Exit status: 0 success, 1 validation failure, 2 configuration error,
// 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybrid/acceptance.hpp"
#include "hybrid/config.hpp"
#include "hybrid/dynamics.hpp"
#include "hybrid/experiments.hpp"
#include "hybrid/gaussian.hpp"
#include "hybrid/run_record.hpp"

namespace fs = std::filesystem;
using namespace hybrid;

namespace {

enum Exit { kOk = 0, kValidation = 1, kConfig = 2, kNumerical = 3 };

struct Options {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::vector<std::string> sets;
  std::string solver;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

// Parses the configuration, applies --set and --solver, and echoes the
// resolved configuration into the output directory.
RunConfig load(const Options& o) {
  RunConfig c;
  try {
    std::vector<std::string> overrides = o.sets;
    if (!o.solver.empty()) overrides.push_back("run.solver=\"" + o.solver + "\"");
    c = parse_config(o.config.empty() ? std::string("{}") : read_file(o.config), overrides);
    // A checkpoint that cannot be read is a configuration problem too.
    if (c.checkpoint && !fs::exists(*c.checkpoint))
      throw Error(ErrorCode::RangeError, "initial.checkpoint: no such file " + *c.checkpoint);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + o.out + ": " + ec.message());
  write_file(fs::path(o.out) / "resolved_config.json", resolved_config_text(c));
  return c;
}

int simulate(const Options& o) {
  const RunConfig c = load(o);
  const auto probes = probes_of(c);
  if (c.solver != SolverKind::moments) {
    const Evolution e = evolve(initial_state(c), c.params, c.integrator, c.t0, c.t_end, c.sample_dt, probes);
    save_csv(fs::path(o.out) / "grid.csv", e.record);
    std::printf("grid: %zu samples, %ld steps -> %s\n", e.record.samples.size(), e.record.diagnostics.steps,
                (fs::path(o.out) / "grid.csv").c_str());
  }
  if (c.solver != SolverKind::grid) {
    if (c.checkpoint) throw Error(ErrorCode::NonQuadratic, "the moments solver needs a Gaussian initial state");
    const MomentEvolution m =
        evolve_moments_record(c.initial, c.params, c.t0, c.t_end, c.sample_dt, c.moments_dt, c.grid, probes);
    save_csv(fs::path(o.out) / "moments.csv", m.record);
    std::printf("moments: %zu samples -> %s\n", m.record.samples.size(), (fs::path(o.out) / "moments.csv").c_str());
  }
  return kOk;
}

int signaling(const Options& o) {
  const RunConfig c = load(o);
  const Protocol p = make_protocol(c);
  const SignalReport r = run_signaling(p);
  std::optional<OnsetFit> onset;
  if (r.detected) {
    try {
      onset = onset_analysis(r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientSignal) throw;
    }
  }
  std::optional<HalfEnsembleStats> half;
  if (r.final_A && r.final_B) half = half_ensemble_detection(r, c.half_ensemble_samples, o.seed);
  write_report(o.out, r, onset, half);
  std::printf("branch %s, solver %s: detected = %s, max |d<x2>| = %s, threshold = %s\n", r.branch_label.c_str(),
              r.solver_label.c_str(), r.detected ? "true" : "false", format_number(r.max_divergence).c_str(),
              format_number(r.threshold).c_str());
  if (onset) std::printf("onset power %.4f\n", onset->power);
  if (half) std::printf("required samples per half-ensemble %s\n", format_number(half->required_n).c_str());
  return kOk;
}

int bracket_check(const Options& o) {
  const RunConfig c = load(o);
  const BracketSweepReport r = bracket_sweep(c.bracket_check.states, c.bracket_check.n, o.seed);
  const std::string text = r.text();
  write_file(fs::path(o.out) / "bracket_check.txt", text);
  std::fputs(text.c_str(), stdout);
  return r.all_passed() ? kOk : kValidation;
}

int validate(const Options& o) {
  load(o);
  AcceptanceOptions opts;
  opts.seed = o.seed;
  AcceptanceSuite suite(opts);
  std::ostringstream summary;
  int failed = 0;
  suite.run_all([&](const CriterionResult& r) {
    std::printf("%s\n", format_result(r).c_str());
    std::fflush(stdout);
    summary << "criterion_" << r.id << ": " << (r.pass ? "pass" : "fail") << "\n";
    if (!r.pass) ++failed;
  });
  summary << "failed: " << failed << "\n";
  write_file(fs::path(o.out) / "validation.txt", summary.str());
  return failed == 0 ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid classical-quantum ensemble simulator"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--set", o.sets, "override, e.g. hamiltonian.m_q=2 (repeatable)");
    sub->add_option("--solver", o.solver, "grid, moments or both")
        ->check(CLI::IsMember({"grid", "moments", "both"}));
  };
  CLI::App* sim = app.add_subcommand("simulate", "evolve the configured initial state and write CSV");
  CLI::App* sig = app.add_subcommand("signaling", "run the branch-and-compare protocol");
  CLI::App* brk = app.add_subcommand("bracket-check", "randomized bracket identity sweep");
  CLI::App* val = app.add_subcommand("validate", "run the acceptance suite");
  for (CLI::App* sub : {sim, sig, brk, val}) common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (sim->parsed()) return simulate(o);
    if (sig->parsed()) return signaling(o);
    if (brk->parsed()) return bracket_check(o);
    if (val->parsed()) return validate(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return e.code() == ErrorCode::IoError ? kConfig : kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kOk;
}
