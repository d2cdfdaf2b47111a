#include "hybrid/brackets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hybrid/stencil.hpp"

namespace hybrid {

VariationalDerivative Functional::closed_form(const HybridState& s) const {
  if (!derivative_) throw Error(ErrorCode::DerivativeUnavailable, "no closed-form derivative for " + label_);
  return derivative_(s);
}

namespace {

double max_abs(const Field& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

Field scaled(Field f, double s) {
  for (double& v : f.values()) v *= s;
  return f;
}

Field product(const Field& a, const Field& b) {
  Field out(a.n_q(), a.n_x());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] * b[k];
  return out;
}

VariationalDerivative classical_derivative(const HybridState& s, const PhasePolynomial& poly) {
  const auto& g = s.grid();
  VariationalDerivative d{Field(g), Field(g)};
  if (!poly.depends_on_momentum()) {
    for (int i = 0; i < g.n_q; ++i)
      for (int j = 0; j < g.n_x; ++j) d.dP(i, j) = poly(g.x(j), 0.0);
    return d;
  }
  const Field Sx = d1(s.S(), g, Axis::x);
  Field w(g);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) {
      d.dP(i, j) = poly(g.x(j), Sx(i, j));
      w(i, j) = s.P()(i, j) * poly.dp(g.x(j), Sx(i, j));
    }
  d.dS = d1_adjoint(w, g, Axis::x);
  return d;
}

// Derivatives of integral P [a (d_qS)^2 + b * fisher + c * d_qS + V(q)].
VariationalDerivative quantum_sector_derivative(const HybridState& s, const HamiltonianParams& params, double a,
                                                double b, double c, const Field* V) {
  const auto& g = s.grid();
  const Field Sq = d1(s.S(), g, Axis::q);
  VariationalDerivative d{Field(g), Field(g)};
  const Field Fv = b != 0.0 ? fisher_variation(s, params.regularization) : Field(g);
  Field w(g);
  for (std::size_t k = 0; k < w.size(); ++k) {
    d.dP[k] = a * Sq[k] * Sq[k] + b * Fv[k] + c * Sq[k] + (V ? (*V)[k] : 0.0);
    w[k] = s.P()[k] * (2.0 * a * Sq[k] + c);
  }
  d.dS = d1_adjoint(w, g, Axis::q);
  return d;
}

VariationalDerivative quantum_derivative(const HybridState& s, const Observable& o, const HamiltonianParams& params) {
  const auto& g = s.grid();
  const double h2 = params.hbar * params.hbar;
  switch (o.op) {
    case QuantumOperator::position: {
      const Field f = tabulate(g, [](double q, double) { return q; });
      return {f, Field(g)};
    }
    case QuantumOperator::position_squared: {
      const Field f = tabulate(g, [](double q, double) { return q * q; });
      return {f, Field(g)};
    }
    case QuantumOperator::potential:
      return {quantum_potential_field(g, params), Field(g)};
    case QuantumOperator::momentum:
      return quantum_sector_derivative(s, params, 0.0, 0.0, 1.0, nullptr);
    case QuantumOperator::momentum_squared:
      return quantum_sector_derivative(s, params, 1.0, h2 / 4.0, 0.0, nullptr);
    case QuantumOperator::kinetic_energy:
      return quantum_sector_derivative(s, params, 0.5 / params.m_q, h2 / (8.0 * params.m_q), 0.0, nullptr);
  }
  throw Error(ErrorCode::DerivativeUnavailable, o.label);
}

std::string part_label(HamiltonianPart part) {
  switch (part) {
    case HamiltonianPart::quantum: return "H_q";
    case HamiltonianPart::classical: return "H_c";
    case HamiltonianPart::interaction: return "H_int";
    case HamiltonianPart::total: return "H";
  }
  return "H?";
}

}  // namespace

FunctionalHandle handle(const Observable& o, const HamiltonianParams& params, DerivativeMode mode) {
  Functional::ValueFn value = [o, params](const HybridState& s) { return expectation(s, o, params); };
  Functional::DerivativeFn deriv;
  if (o.is_classical())
    deriv = [o](const HybridState& s) { return classical_derivative(s, o.poly); };
  else
    deriv = [o, params](const HybridState& s) { return quantum_derivative(s, o, params); };
  return {Functional(o.label, std::move(value), std::move(deriv)), mode};
}

FunctionalHandle handle(HamiltonianPart part, const HamiltonianParams& params, double t, DerivativeMode mode) {
  Functional::ValueFn value;
  Functional::DerivativeFn deriv;
  switch (part) {
    case HamiltonianPart::quantum:
      value = [params](const HybridState& s) { return quantum_sector_energy(s, params); };
      deriv = [params](const HybridState& s) {
        const Field Vq = quantum_potential_field(s.grid(), params);
        const double h2 = params.hbar * params.hbar;
        return quantum_sector_derivative(s, params, 0.5 / params.m_q, h2 / (8.0 * params.m_q), 0.0, &Vq);
      };
      break;
    case HamiltonianPart::classical:
      value = [params](const HybridState& s) { return classical_sector_energy(s, params); };
      deriv = [params](const HybridState& s) {
        const auto& g = s.grid();
        const Field Sx = d1(s.S(), g, Axis::x);
        const Field Vx = classical_potential_field(g, params);
        VariationalDerivative d{Field(g), Field(g)};
        Field w(g);
        for (std::size_t k = 0; k < w.size(); ++k) {
          d.dP[k] = Sx[k] * Sx[k] / (2.0 * params.m_x) + Vx[k];
          w[k] = s.P()[k] * Sx[k] / params.m_x;
        }
        d.dS = d1_adjoint(w, g, Axis::x);
        return d;
      };
      break;
    case HamiltonianPart::interaction:
      value = [params, t](const HybridState& s) { return interaction_energy(s, params, t); };
      deriv = [params, t](const HybridState& s) {
        const auto& g = s.grid();
        return VariationalDerivative{scaled(coupling_field(g, params), params.lambda_at(t)), Field(g)};
      };
      break;
    case HamiltonianPart::total:
      value = [params, t](const HybridState& s) { return ensemble_energy(s, params, t); };
      deriv = [params, t](const HybridState& s) {
        return VariationalDerivative{delta_H_delta_P(s, params, t), delta_H_delta_S(s, params, t)};
      };
      break;
  }
  return {Functional(part_label(part), std::move(value), std::move(deriv)), mode};
}

VariationalDerivative finite_difference_derivative(const Functional& F, const HybridState& s, double rel_step) {
  const auto& g = s.grid();
  const double dP = rel_step * std::max(max_abs(s.P()), std::numeric_limits<double>::min());
  const double dS = rel_step * std::max(1.0, max_abs(s.S()));
  const double area = g.cell_area();
  VariationalDerivative d{Field(g), Field(g)};
  Field P = s.P();
  Field S = s.S();
  const auto eval = [&]() { return F(HybridState::unnormalized(g, P, S)); };
  for (std::size_t k = 0; k < P.size(); ++k) {
    const double p0 = P[k];
    if (p0 >= dP) {
      P[k] = p0 + dP;
      const double up = eval();
      P[k] = p0 - dP;
      const double dn = eval();
      d.dP[k] = (up - dn) / (2.0 * dP * area);
    } else {
      P[k] = p0 + 2.0 * dP;
      const double up2 = eval();
      P[k] = p0 + dP;
      const double up = eval();
      P[k] = p0;
      const double mid = eval();
      d.dP[k] = (-up2 + 4.0 * up - 3.0 * mid) / (2.0 * dP * area);
    }
    P[k] = p0;

    const double s0 = S[k];
    S[k] = s0 + dS;
    const double up = eval();
    S[k] = s0 - dS;
    const double dn = eval();
    S[k] = s0;
    d.dS[k] = (up - dn) / (2.0 * dS * area);
  }
  return d;
}

VariationalDerivative variational_derivative(const FunctionalHandle& h, const HybridState& s) {
  switch (h.mode) {
    case DerivativeMode::analytic:
      return h.functional.closed_form(s);
    case DerivativeMode::finite_difference:
      return finite_difference_derivative(h.functional, s);
    case DerivativeMode::directional:
      break;
  }
  throw Error(ErrorCode::DerivativeUnavailable, h.functional.label() + " has no variational derivative");
}

HybridState flow_displace(const HybridState& s, const VariationalDerivative& gen, double eps) {
  Field P = s.P();
  Field S = s.S();
  for (std::size_t k = 0; k < P.size(); ++k) {
    P[k] = std::max(P[k] + eps * gen.dS[k], 0.0);
    S[k] -= eps * gen.dP[k];
  }
  return HybridState::unnormalized(s.grid(), std::move(P), std::move(S));
}

double directional_derivative(const Functional& F, const HybridState& s, const VariationalDerivative& gen,
                              double step) {
  const double rate_P = max_abs(gen.dS) / std::max(max_abs(s.P()), std::numeric_limits<double>::min());
  const double rate_S = max_abs(gen.dP) / std::max(1.0, max_abs(s.S()));
  const double rate = std::max(rate_P, rate_S);
  if (rate == 0.0) return 0.0;
  const double h = step / rate;
  const auto central = [&](double e) { return (F(flow_displace(s, gen, e)) - F(flow_displace(s, gen, -e))) / (2.0 * e); };
  const double coarse = central(h);
  const double fine = central(0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

double poisson_bracket(const FunctionalHandle& A, const FunctionalHandle& B, const HybridState& s) {
  const bool a_diff = A.mode != DerivativeMode::directional;
  const bool b_diff = B.mode != DerivativeMode::directional;
  if (a_diff && b_diff) {
    const auto dA = variational_derivative(A, s);
    const auto dB = variational_derivative(B, s);
    Field integrand(s.grid());
    for (std::size_t k = 0; k < integrand.size(); ++k)
      integrand[k] = dA.dP[k] * dB.dS[k] - dB.dP[k] * dA.dS[k];
    return integrate(integrand, s.grid());
  }
  if (b_diff) return directional_derivative(A.functional, s, variational_derivative(B, s));
  if (a_diff) return -directional_derivative(B.functional, s, variational_derivative(A, s));
  throw Error(ErrorCode::DerivativeUnavailable,
              "bracket of " + A.functional.label() + " and " + B.functional.label() + " needs one derivative");
}

FunctionalHandle bracket_handle(FunctionalHandle A, FunctionalHandle B) {
  const std::string label = "{" + A.functional.label() + "," + B.functional.label() + "}";
  Functional f(label, [A = std::move(A), B = std::move(B)](const HybridState& s) { return poisson_bracket(A, B, s); });
  return {std::move(f), DerivativeMode::directional};
}

TransformResult canonical_transform(const HybridState& s, const FunctionalHandle& B, double eps) {
  if (eps == 0.0) return {s, 0.0, false, {}};
  const auto dB = variational_derivative(B, s);
  const auto& g = s.grid();
  Field P = s.P();
  Field S = s.S();
  for (std::size_t k = 0; k < P.size(); ++k) {
    P[k] += eps * dB.dS[k];
    S[k] -= eps * dB.dP[k];
    if (P[k] < 0.0)
      throw Error(ErrorCode::NegativeDensity, "transform by " + B.functional.label() + " drives P negative");
  }
  TransformResult r{HybridState::unnormalized(g, std::move(P), std::move(S)), 0.0, false, {}};
  const double flux = integrate(dB.dS, g);
  r.probability_change = eps * flux;
  if (std::abs(flux) <= 1e-9) {
    r.state = normalize(r.state);
    r.renormalized = true;
  } else {
    r.diagnostic = "generator " + B.functional.label() + " changes total probability at rate " +
                   std::to_string(flux) + "; state left unnormalised";
  }
  return r;
}

double signal_integral(const HybridState& s, const HamiltonianParams& params) {
  const auto& g = s.grid();
  const auto& reg = params.regularization;
  const Field Lq = d1(log_density(s, reg), g, Axis::q);
  const Field dx_Lq2 = d1(product(Lq, Lq), g, Axis::x);
  double pmax = 0.0;
  for (double v : s.P().values()) pmax = std::max(pmax, v);
  const double cut = reg.enabled ? reg.mask_rel * pmax : 0.0;
  Field integrand(g);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) {
      const double p = s.P()(i, j);
      integrand(i, j) = (reg.enabled && p < cut) ? 0.0 : p * g.x(j) * dx_Lq2(i, j);
    }
  const double value = params.hbar * params.hbar / (4.0 * params.m_x * params.m_q) * integrate(integrand, g);
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFinite, "signal integral");
  return value;
}

namespace {

void require_free(const HamiltonianParams& params, double t, const char* what) {
  if (params.lambda_at(t) != 0.0) throw Error(ErrorCode::ContextViolation, std::string(what) + ": coupling is on");
  if (!params.potential.V_x.is_flat())
    throw Error(ErrorCode::ContextViolation, std::string(what) + ": V_x is not flat");
}

}  // namespace

double d2dt2_x2_free(const HybridState& s, const HamiltonianParams& params, double t) {
  require_free(params, t, "d2dt2_x2_free");
  const auto [p1, p2] = classical_momentum_moments(s);
  (void)p1;
  return 2.0 * p2 / (params.m_x * params.m_x) + signal_integral(s, params);
}

double d3dt3_x2_free(const HybridState& s, const HamiltonianParams& params, double t) {
  require_free(params, t, "d3dt3_x2_free");
  const auto& g = s.grid();
  const double c = params.hbar * params.hbar / (8.0 * params.m_q);
  const Field Q = scaled(fisher_variation(s, params.regularization), c);
  const Field dxQ = d1(Q, g, Axis::x);
  const Field Sx = d1(s.S(), g, Axis::x);
  double pmax = 0.0;
  for (double v : s.P().values()) pmax = std::max(pmax, v);
  const auto& reg = params.regularization;
  const double cut = reg.enabled ? reg.mask_rel * pmax : 0.0;
  Field integrand(g);
  for (std::size_t k = 0; k < integrand.size(); ++k)
    integrand[k] = (reg.enabled && s.P()[k] < cut) ? 0.0 : s.P()[k] * Sx[k] * dxQ[k];
  return -4.0 / (params.m_x * params.m_x) * integrate(integrand, g);
}

SecondDerivativeTerms second_derivative_decomposition(const HybridState& s, const HamiltonianParams& params,
                                                      double t) {
  if (params.lambda_at(t) != 0.0)
    throw Error(ErrorCode::ContextViolation, "second_derivative_decomposition: coupling is on");
  const Observable x2 = obs::x2();
  const auto A = handle(x2, params);
  const auto Hq = handle(HamiltonianPart::quantum, params, t);
  const auto Hc = handle(HamiltonianPart::classical, params, t);

  // {<C(x)>, H_c} = <C'(x) p_x> / m_x in closed form.
  PhasePolynomial flux;
  const PhasePolynomial dC = x2.poly.derivative_x();
  for (int a = 0; a < PhasePolynomial::kMaxDegree; ++a) flux.c[a][1] = dC.c[a][0] / params.m_x;
  const auto inner_c = handle(Observable::classical(flux, "{x2,H_c}"), params);
  const auto inner_q = bracket_handle(A, Hq);

  SecondDerivativeTerms r;
  r.cc = poisson_bracket(inner_c, Hc, s);
  r.cq = poisson_bracket(inner_c, Hq, s);
  r.qc = poisson_bracket(inner_q, Hc, s);
  r.qq = poisson_bracket(inner_q, Hq, s);
  r.jacobi_rewrite = -poisson_bracket(bracket_handle(Hc, Hq), A, s);
  r.signal_integral = signal_integral(s, params);
  r.formula = params.potential.V_x.is_flat() ? d2dt2_x2_free(s, params, t)
                                             : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace hybrid
