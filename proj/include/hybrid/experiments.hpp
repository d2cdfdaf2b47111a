#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hybrid/dynamics.hpp"
#include "hybrid/gaussian.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/run_record.hpp"

namespace hybrid {

enum class SolverKind { grid, moments, both };

/// Post-switch modification of the quantum sector applied to branch B.
struct Branch {
  enum class Kind { none, scale_mq, replace_Vq };
  Kind kind = Kind::scale_mq;
  double factor = 2.0;  // scale_mq: m_q -> factor * m_q
  Quadratic V_q;        // replace_Vq: the new quantum potential

  bool operator==(const Branch&) const = default;
};

/// params with the branch modification applied.
HamiltonianParams apply_branch(const HamiltonianParams& params, const Branch& branch);

struct Protocol {
  GaussianMoments initial;
  std::optional<HybridState> initial_state;  // overrides `initial` (grid solver only)
  GridSpec grid;
  HamiltonianParams params;  // exactly one interaction window; t_off is its end
  Branch branch;
  double t_end = 2.0;
  double sample_dt = 0.01;
  SolverKind solver = SolverKind::grid;
  IntegratorSpec integrator;
  double moments_dt = 1e-3;
  bool detect = true;
  std::vector<Observable> probes;

  double t_off() const;
  /// Throws RangeError for a malformed schedule or time span.
  void validate() const;
};

/// Self-chosen default: ground-state Gaussians (x displaced by 1)
/// coupled with lambda = 1 on [0, 1), then free until t = 2; branch B
/// doubles m_q.
Protocol default_protocol();

struct DivergencePoint {
  double t;
  double delta;  // <x^2>_A - <x^2>_B
};

struct SignalReport {
  RunRecord series_A;
  RunRecord series_B;
  std::optional<RunRecord> moments_A;  // present when both solvers ran
  std::optional<RunRecord> moments_B;
  std::vector<DivergencePoint> divergence;
  double t_off = 0.0;
  double max_divergence = 0.0;
  double noise_floor = 0.0;
  double threshold = 0.0;
  bool detected = false;
  bool pre_branch_identical = false;
  std::optional<HybridState> final_A;  // classical marginals at t_end feed the sampling test
  std::optional<HybridState> final_B;
  std::string branch_label;
  std::string solver_label;
  double t_end = 0.0;
};

std::string to_string(const Branch& b);
std::string to_string(SolverKind k);

/// Evolve to t_off, fork branches A (unmodified) and B (branch applied),
/// evolve both concurrently to t_end and compare <x^2>. The detection
/// threshold is ten times the noise floor of the control branch A: the
/// largest grid-minus-moments deviation of <x^2> for quadratic protocols
/// (moment step halving for the moments solver alone), never below an
/// absolute floor of 1e-14 * max <x^2>.
/// Throws BranchInvalid if the branch is none while detection is requested.
SignalReport run_signaling(const Protocol& p);

struct OnsetFit {
  double power = 0.0;
  double coefficient = 0.0;  // |delta| ~ coefficient * (t - t_off)^power
  double tau_min = 0.0;
  double tau_max = 0.0;
  int points = 0;
};

/// Least-squares fit of log|delta| against log(t - t_off) over the earliest
/// decade of post-branch samples above the noise threshold. Needs at least 20
/// post-branch samples; throws InsufficientSignal if none clears the noise.
OnsetFit onset_analysis(const SignalReport& r);

struct HalfEnsembleStats {
  int n_samples = 0;
  double mean_A = 0.0;  // sample means of x^2
  double mean_B = 0.0;
  double z = 0.0;
  double delta = 0.0;  // exact <x^2>_A - <x^2>_B from the marginals
  double var_A = 0.0;  // exact Var(x^2) under each marginal
  double var_B = 0.0;
  double required_n = 0.0;  // per sub-ensemble for power 0.95 at two-sided 0.05; inf if delta = 0
};

/// Draw n_samples x-values from each branch's classical marginal at t_end
/// and compare the sample means of x^2.
HalfEnsembleStats half_ensemble_detection(const SignalReport& r, int n_samples, std::uint64_t seed);

/// series_A.csv, series_B.csv (plus moments_*.csv if present) and
/// summary.txt of key: value lines.
void write_report(const std::filesystem::path& dir, const SignalReport& r, const std::optional<OnsetFit>& onset,
                  const std::optional<HalfEnsembleStats>& half);

}  // namespace hybrid
