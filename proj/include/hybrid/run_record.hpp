#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/observables.hpp"

namespace hybrid {

struct Sample {
  double t = 0.0;
  double norm = 0.0;
  double energy = 0.0;
  double x_mean = 0.0;
  double x_var = 0.0;
  double px_mean = 0.0;
  double px2 = 0.0;
  double q_mean = 0.0;
  double q_var = 0.0;
  double pq2 = 0.0;
  double separability_defect = 0.0;
  double signal_integral = 0.0;
  double d2x2_formula = 0.0;  // NaN while the coupling is on or V_x is not flat
  std::vector<double> probes;

  double x2() const { return x_var + x_mean * x_mean; }
};

/// Integration bookkeeping accumulated over a run.
struct RunDiagnostics {
  long steps = 0;
  double max_drift_per_step = 0.0;    // |mass - 1| per step between renormalisations
  double max_renormalization = 0.0;   // largest |mass - 1| removed by a renormalisation
  double clamped_mass = 0.0;
  double initial_rescale = 1.0;
};

struct RunRecord {
  std::string solver = "grid";
  std::vector<std::string> probe_labels;
  std::vector<Sample> samples;
  RunDiagnostics diagnostics;
};

/// The fixed CSV columns, in order, before any probe columns.
const std::vector<std::string>& record_columns();

/// Value of a fixed column by name.
double column(const Sample& s, const std::string& name);

/// Measure every fixed column (and the probes) on a normalised state.
Sample measure(const HybridState& s, const HamiltonianParams& params, double t,
               const std::vector<Observable>& probes, double norm);

void write_csv(std::ostream& os, const RunRecord& r);
RunRecord read_csv(std::istream& is);
void save_csv(const std::filesystem::path& path, const RunRecord& r);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace hybrid
