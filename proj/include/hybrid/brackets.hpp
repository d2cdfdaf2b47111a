#pragma once

#include <functional>
#include <string>

#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/observables.hpp"

namespace hybrid {

/// Variational derivatives dA/dP and dA/dS, per unit cell area.
struct VariationalDerivative {
  Field dP;
  Field dS;
};

/// A functional A[P, S], optionally with a closed-form variational derivative.
class Functional {
 public:
  using ValueFn = std::function<double(const HybridState&)>;
  using DerivativeFn = std::function<VariationalDerivative(const HybridState&)>;

  Functional(std::string label, ValueFn value, DerivativeFn derivative = {})
      : label_(std::move(label)), value_(std::move(value)), derivative_(std::move(derivative)) {}

  double operator()(const HybridState& s) const { return value_(s); }
  bool has_closed_form() const { return static_cast<bool>(derivative_); }
  /// Throws DerivativeUnavailable if no closed form is registered.
  VariationalDerivative closed_form(const HybridState& s) const;
  const std::string& label() const { return label_; }

 private:
  std::string label_;
  ValueFn value_;
  DerivativeFn derivative_;
};

enum class DerivativeMode {
  analytic,           // closed-form derivative (required)
  finite_difference,  // per-cell central differences, O(N^2) per bracket
  directional,        // no derivative; brackets use the partner's flow
};

enum class HamiltonianPart { quantum, classical, interaction, total };

struct FunctionalHandle {
  Functional functional;
  DerivativeMode mode = DerivativeMode::analytic;
};

FunctionalHandle handle(const Observable& o, const HamiltonianParams& params,
                        DerivativeMode mode = DerivativeMode::analytic);
FunctionalHandle handle(HamiltonianPart part, const HamiltonianParams& params, double t,
                        DerivativeMode mode = DerivativeMode::analytic);

/// Per-cell central-difference derivative; the slow verification path.
VariationalDerivative finite_difference_derivative(const Functional& F, const HybridState& s,
                                                   double rel_step = 1e-6);

/// Derivative according to the handle's mode. Throws DerivativeUnavailable
/// for directional handles and for analytic handles without a closed form.
VariationalDerivative variational_derivative(const FunctionalHandle& h, const HybridState& s);

/// State displaced along the Hamiltonian flow generated by a functional:
/// (P + eps dB/dS, S - eps dB/dP), with P clipped at zero.
HybridState flow_displace(const HybridState& s, const VariationalDerivative& gen, double eps);

/// d/d eps F(flow_displace(s, gen, eps)) at eps = 0 by Richardson-extrapolated
/// central differences. The base step is rescaled so that the largest
/// relative field change stays at `step`.
double directional_derivative(const Functional& F, const HybridState& s, const VariationalDerivative& gen,
                              double step = 1e-5);

/// {A, B} = integral (dA/dP dB/dS - dB/dP dA/dS) dq dx. If only one side has
/// a derivative the bracket is taken as the rate of change of the other
/// along its flow.
double poisson_bracket(const FunctionalHandle& A, const FunctionalHandle& B, const HybridState& s);

/// The functional s -> {A, B}(s), usable as the inner part of nested brackets.
FunctionalHandle bracket_handle(FunctionalHandle A, FunctionalHandle B);

struct TransformResult {
  HybridState state;
  double probability_change = 0.0;  // integral of eps dB/dS
  bool renormalized = false;
  std::string diagnostic;
};

/// Infinitesimal canonical transformation generated by B:
/// P -> P + eps dB/dS, S -> S - eps dB/dP. Throws NegativeDensity if P
/// would become negative.
TransformResult canonical_transform(const HybridState& s, const FunctionalHandle& B, double eps);

/// (hbar^2 / (4 m_x m_q)) integral P x d_x[(d_q ln P)^2] dq dx.
double signal_integral(const HybridState& s, const HamiltonianParams& params);

/// 2<p_x^2>/m_x^2 + signal_integral. Throws ContextViolation unless the
/// coupling is off at t and V_x is flat.
double d2dt2_x2_free(const HybridState& s, const HamiltonianParams& params, double t = 0.0);

/// Third time derivative of <x^2> for a free classical sector,
/// -(4/m_x^2) integral P d_xS d_xQ with Q the quantum potential. This is the
/// lowest order at which the quantum-sector parameters reach <x^2>.
double d3dt3_x2_free(const HybridState& s, const HamiltonianParams& params, double t = 0.0);

/// The four nested-bracket terms of d^2<x^2>/dt^2 with H = H_q + H_c.
struct SecondDerivativeTerms {
  double cc = 0.0;  // {{<x2>, H_c}, H_c}
  double cq = 0.0;  // {{<x2>, H_c}, H_q}
  double qc = 0.0;  // {{<x2>, H_q}, H_c}
  double qq = 0.0;  // {{<x2>, H_q}, H_q}
  double jacobi_rewrite = 0.0;  // -{{H_c, H_q}, <x2>}
  double signal_integral = 0.0;
  double formula = 0.0;  // d2dt2_x2_free

  double sum() const { return cc + cq + qc + qq; }
};

SecondDerivativeTerms second_derivative_decomposition(const HybridState& s, const HamiltonianParams& params,
                                                      double t = 0.0);

}  // namespace hybrid
