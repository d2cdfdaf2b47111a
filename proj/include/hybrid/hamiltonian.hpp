#pragma once

#include <optional>
#include <vector>

#include "hybrid/grid.hpp"

namespace hybrid {

/// a0 + a1*s + a2*s^2
struct Quadratic {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;

  double operator()(double s) const { return a0 + s * (a1 + s * a2); }
  bool operator==(const Quadratic&) const = default;
};

/// One-coordinate potential: a quadratic polynomial, or values tabulated at
/// the cell centres of the corresponding axis.
struct AxisPotential {
  Quadratic poly;
  std::optional<std::vector<double>> table;

  double at(int index, double coord) const { return table ? (*table)[index] : poly(coord); }
  bool is_quadratic() const { return !table.has_value(); }
  bool is_flat() const;

  bool operator==(const AxisPotential&) const = default;
};

/// V(q, x) = V_q(q) + V_x(x) + lambda(t) * U(q, x), with U = q*x unless a
/// coupling profile is tabulated.
struct PotentialSpec {
  AxisPotential V_q;
  AxisPotential V_x;
  std::optional<Field> coupling_profile;

  bool is_quadratic() const {
    return V_q.is_quadratic() && V_x.is_quadratic() && !coupling_profile;
  }
  void validate(const GridSpec& g) const;

  bool operator==(const PotentialSpec&) const = default;
};

/// Coupling strength lambda active on [t_start, t_end).
struct InteractionWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  double lambda = 0.0;

  bool operator==(const InteractionWindow&) const = default;
};

/// Guards for ln P and 1/P. Cells with P < mask_rel * max(P) are excluded
/// from the quantum-pressure terms; ln P is evaluated at max(P, floor_rel *
/// max(P)). With enabled = false neither guard is applied.
struct Regularization {
  double floor_rel = 1e-300;
  double mask_rel = 1e-13;
  bool enabled = true;

  bool operator==(const Regularization&) const = default;
};

struct HamiltonianParams {
  double m_q = 1.0;
  double m_x = 1.0;
  double hbar = 1.0;
  PotentialSpec potential;
  std::vector<InteractionWindow> schedule;
  Regularization regularization;

  /// Piecewise-constant coupling strength; zero outside every window.
  double lambda_at(double t) const;

  /// Throws RangeError on non-positive masses or hbar, or overlapping,
  /// unordered or empty windows.
  void validate() const;

  bool operator==(const HamiltonianParams&) const = default;
};

Field potential_field(const GridSpec& g, const HamiltonianParams& params, double t);

/// V_q(q) tabulated over the full grid.
Field quantum_potential_field(const GridSpec& g, const HamiltonianParams& params);

/// V_x(x) tabulated over the full grid.
Field classical_potential_field(const GridSpec& g, const HamiltonianParams& params);

/// The coupling profile U(q, x) (q*x unless tabulated).
Field coupling_field(const GridSpec& g, const HamiltonianParams& params);

// Quantum-pressure building blocks shared by the Hamiltonian, the quantum
// observables and the bracket derivatives. With L = ln P and the mask m,
//   fisher_integrand = m * P * (dL/dq)^2
//   fisher_variation = m * (dL/dq)^2 + 2 * D_q^T(m * P * dL/dq) / P,
// the latter being the exact gradient (per unit cell area) of the former's
// grid quadrature with respect to P. It approximates -(L_q^2 + 2 L_qq).

Field log_density(const HybridState& s, const Regularization& reg);
Field fisher_integrand(const HybridState& s, const Regularization& reg);
Field fisher_variation(const HybridState& s, const Regularization& reg);

double ensemble_energy(const HybridState& s, const HamiltonianParams& params, double t);

/// Sector pieces of the ensemble energy: H = H_q + H_c + H_int.
double quantum_sector_energy(const HybridState& s, const HamiltonianParams& params);
double classical_sector_energy(const HybridState& s, const HamiltonianParams& params);
double interaction_energy(const HybridState& s, const HamiltonianParams& params, double t);

/// dH/dS = -d_q(P d_qS / m_q) - d_x(P d_xS / m_x), as the adjoint-stencil
/// form whose grid sum vanishes identically.
Field delta_H_delta_S(const HybridState& s, const HamiltonianParams& params, double t);

/// dH/dP = (d_qS)^2/2m_q + (d_xS)^2/2m_x + V(q, x, t) + quantum potential.
Field delta_H_delta_P(const HybridState& s, const HamiltonianParams& params, double t);

}  // namespace hybrid
