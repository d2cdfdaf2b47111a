#pragma once

#include <vector>

#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/observables.hpp"
#include "hybrid/run_record.hpp"
#include "hybrid/stencil.hpp"

namespace hybrid {

enum class Scheme { rk4 };

struct IntegratorSpec {
  double dt = 0.0;  // 0 selects the stability bound
  Scheme scheme = Scheme::rk4;
  int renormalize_every = 10;
  long max_steps = 100'000'000;
  double c_stab = 0.1;

  // Short-wavelength control, see GridSolver::filter and relax_tails.
  bool stabilize = true;
  double filter_gain = 50.0;
  double sponge_depth = 10.0;  // e-folds of P below the peak

  bool operator==(const IntegratorSpec&) const = default;
};

/// c_stab * min(dq, dx)^2 * min(m_q, m_x) / hbar
double stability_bound(const GridSpec& g, const HamiltonianParams& params, double c_stab);

/// The step size to use: spec.dt, or the bound when spec.dt is zero.
/// Throws StabilityBound if |spec.dt| exceeds the bound.
double resolve_dt(const IntegratorSpec& spec, const GridSpec& g, const HamiltonianParams& params);

/// Evolved variables: L = ln P and S.
struct LogFields {
  Field L;
  Field S;
};

LogFields to_log_fields(const HybridState& s, const Regularization& reg);

/// Normalised state from log fields; the pre-normalisation mass goes to *mass.
HybridState to_state(const LogFields& y, const GridSpec& g, double* mass = nullptr);

/// Integrates
///   dL/dt = -(S_qq + L_q S_q)/m_q - (S_xx + L_x S_x)/m_x
///   dS/dt = -S_q^2/2m_q - S_x^2/2m_x - V + (hbar^2/8m_q)(2 L_qq + L_q^2)
/// with classical RK4. The coupling is frozen over each step at its value
/// at the start of the step. Not thread-safe; use one solver per thread.
///
/// The hybrid equations amplify perturbations of short wavelength in q at a
/// rate of roughly hbar k_q |L_x| / (4 sqrt(m_q m_x)), and a Gaussian tail
/// has |L_x| growing with distance from the mean, so round-off alone is
/// enough to wreck a long run. Two controls keep this in check. Both leave
/// quadratic L and S, and so every Gaussian state, untouched.
class GridSolver {
 public:
  GridSolver(GridSpec g, HamiltonianParams params);

  const GridSpec& grid() const { return grid_; }
  const HamiltonianParams& params() const { return params_; }

  void rhs(const LogFields& y, double lambda, LogFields& dy);
  void rk4_step(LogFields& y, double t, double dt);

  /// Sixth-difference filter along q. The strength in each cell follows
  /// the local growth rate per step and saturates at removal of the
  /// Nyquist mode. Nothing is smoothed along x.
  void filter(LogFields& y, double dt, double gain);

  /// Blend cells more than `depth` e-folds below the peak toward quadratic
  /// continuations of L and S, least-squares fitted to the cells from
  /// depth - 6 to depth e-folds down. The blend completes over a further 20
  /// e-folds. If that shell is too sparse or its fitted L does not decay in
  /// every direction, the target is the Gaussian with the state's moments,
  /// phase gradient and phase Hessian.
  void relax_tails(LogFields& y, double depth);

  /// max over significant cells of |L_qq| dq^2 and |L_xx| dx^2; exceeds 1
  /// once a density feature is narrower than a cell.
  double resolution_metric(const LogFields& y) const;

 private:
  GridSpec grid_;
  HamiltonianParams params_;
  Field v_base_;
  Field coupling_;
  Stencil1D q1_, q2_, x1_, x2_;
  LogFields k_, tmp_, acc_;
  std::vector<double> lq_, sq_, lqq_, sqq_;
};

/// Step boundaries for a run over [t0, t1]: every sample time (t0, t0 +
/// sample_dt, ..., and t1) plus each window edge strictly inside the span.
struct Timeline {
  std::vector<double> events;  // sorted, starts at t0, ends at t1
  std::vector<bool> sample;    // sample[k] is true if events[k] is a sample time
};

Timeline make_timeline(double t0, double t1, double sample_dt, const std::vector<InteractionWindow>& schedule);

/// One RK4 step of size spec.dt (or the stability bound) from time t.
/// Throws StabilityBound, or Instability if a field becomes non-finite.
HybridState step(const HybridState& s, const HamiltonianParams& params, const IntegratorSpec& spec, double t);

struct Evolution {
  RunRecord record;
  HybridState final_state;
};

/// Evolve from t0 to t1 sampling every sample_dt (and at t1). Step
/// boundaries are snapped onto sample times and onto interaction-window
/// edges. Throws Caustic when the density collapses below grid resolution.
Evolution evolve(const HybridState& s, const HamiltonianParams& params, const IntegratorSpec& spec, double t0,
                 double t1, double sample_dt, const std::vector<Observable>& probes = {});

}  // namespace hybrid
