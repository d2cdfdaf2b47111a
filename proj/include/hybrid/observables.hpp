#pragma once

#include <array>
#include <string>
#include <utility>

#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"

namespace hybrid {

enum class ObservableKind { classical_config, classical_phase, quantum };

enum class QuantumOperator { position, position_squared, momentum, momentum_squared, kinetic_energy, potential };

/// sum_{a+b<=4} c[a][b] x^a p^b
struct PhasePolynomial {
  static constexpr int kMaxDegree = 4;
  std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> c{};

  static PhasePolynomial monomial(int a, int b, double coeff = 1.0);

  double operator()(double x, double p) const;
  /// Partial derivative in p.
  double dp(double x, double p) const;
  /// Polynomial d/dx of this one.
  PhasePolynomial derivative_x() const;
  bool depends_on_momentum() const;
  bool is_finite() const;

  PhasePolynomial& operator+=(const PhasePolynomial& o);
  PhasePolynomial operator*(double s) const;
  bool operator==(const PhasePolynomial&) const = default;
};

struct Observable {
  ObservableKind kind = ObservableKind::classical_config;
  PhasePolynomial poly;
  QuantumOperator op = QuantumOperator::position;
  std::string label;

  static Observable classical(PhasePolynomial poly, std::string label);
  static Observable quantum(QuantumOperator op, std::string label);

  bool is_classical() const { return kind != ObservableKind::quantum; }
  /// Only configuration observables of the classical sector are measurable.
  bool directly_measurable() const { return kind == ObservableKind::classical_config; }
};

namespace obs {
Observable x();
Observable x2();
Observable p_x();
Observable p_x2();
Observable x_p_x();
Observable q();
Observable q2();
Observable p_q();
Observable p_q2();
Observable kinetic_q();
Observable potential_q();
}  // namespace obs

/// integral P * C(x, d_xS) dq dx. Throws KindMismatch for quantum observables.
double classical_expectation(const HybridState& s, const Observable& o);

/// Registered quantum operators in (P, S) form. Throws KindMismatch for
/// classical observables.
double quantum_expectation(const HybridState& s, const Observable& o, const HamiltonianParams& params);

/// Either of the two above, dispatched on kind.
double expectation(const HybridState& s, const Observable& o, const HamiltonianParams& params);

/// Same registered operators evaluated on psi = sqrt(P) exp(iS/hbar) with a
/// spectral q-derivative. An independent route to quantum_expectation.
double wavefunction_expectation(const HybridState& s, const Observable& o, const HamiltonianParams& params);

/// (<p_x>, <p_x^2>) with p_x = d_xS.
std::pair<double, double> classical_momentum_moments(const HybridState& s);

}  // namespace hybrid
