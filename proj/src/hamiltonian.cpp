#include "hybrid/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hybrid/stencil.hpp"

namespace hybrid {

bool AxisPotential::is_flat() const {
  if (table) {
    return std::all_of(table->begin(), table->end(),
                       [&](double v) { return v == table->front(); });
  }
  return poly.a1 == 0.0 && poly.a2 == 0.0;
}

void PotentialSpec::validate(const GridSpec& g) const {
  for (const auto* p : {&V_q, &V_x}) {
    if (!std::isfinite(p->poly.a0) || !std::isfinite(p->poly.a1) || !std::isfinite(p->poly.a2))
      throw Error(ErrorCode::RangeError, "potential: non-finite polynomial coefficient");
  }
  if (V_q.table && static_cast<int>(V_q.table->size()) != g.n_q)
    throw Error(ErrorCode::RangeError, "potential: V_q table length must equal n_q");
  if (V_x.table && static_cast<int>(V_x.table->size()) != g.n_x)
    throw Error(ErrorCode::RangeError, "potential: V_x table length must equal n_x");
  if (coupling_profile && (coupling_profile->n_q() != g.n_q || coupling_profile->n_x() != g.n_x))
    throw Error(ErrorCode::RangeError, "potential: coupling table shape must match the grid");
}

double HamiltonianParams::lambda_at(double t) const {
  for (const auto& w : schedule)
    if (t >= w.t_start && t < w.t_end) return w.lambda;
  return 0.0;
}

void HamiltonianParams::validate() const {
  if (!(m_q > 0.0) || !std::isfinite(m_q)) throw Error(ErrorCode::RangeError, "m_q must be positive");
  if (!(m_x > 0.0) || !std::isfinite(m_x)) throw Error(ErrorCode::RangeError, "m_x must be positive");
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw Error(ErrorCode::RangeError, "hbar must be positive");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto& w = schedule[k];
    if (!(w.t_end > w.t_start) || !std::isfinite(w.lambda))
      throw Error(ErrorCode::RangeError, "schedule window " + std::to_string(k) + " is empty or non-finite");
    if (k > 0 && w.t_start < schedule[k - 1].t_end)
      throw Error(ErrorCode::RangeError, "schedule windows must be time-ordered and non-overlapping");
  }
}

Field quantum_potential_field(const GridSpec& g, const HamiltonianParams& params) {
  Field V(g);
  for (int i = 0; i < g.n_q; ++i) {
    const double v = params.potential.V_q.at(i, g.q(i));
    std::fill(V.row(i), V.row(i) + g.n_x, v);
  }
  return V;
}

Field classical_potential_field(const GridSpec& g, const HamiltonianParams& params) {
  Field V(g);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) V(i, j) = params.potential.V_x.at(j, g.x(j));
  return V;
}

Field coupling_field(const GridSpec& g, const HamiltonianParams& params) {
  if (params.potential.coupling_profile) return *params.potential.coupling_profile;
  return tabulate(g, [](double q, double x) { return q * x; });
}

Field potential_field(const GridSpec& g, const HamiltonianParams& params, double t) {
  Field V = quantum_potential_field(g, params);
  const Field Vx = classical_potential_field(g, params);
  const double lambda = params.lambda_at(t);
  const Field U = lambda != 0.0 ? coupling_field(g, params) : Field(g);
  for (std::size_t k = 0; k < V.size(); ++k) V[k] += Vx[k] + lambda * U[k];
  return V;
}

namespace {

double max_of(const Field& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, v);
  return m;
}

Field mask_of(const HybridState& s, const Regularization& reg) {
  const Field& P = s.P();
  Field m(s.grid(), 1.0);
  if (!reg.enabled) return m;
  const double cut = reg.mask_rel * max_of(P);
  for (std::size_t k = 0; k < P.size(); ++k) m[k] = P[k] >= cut ? 1.0 : 0.0;
  return m;
}

void require_finite(const Field& f, const char* what) {
  for (double v : f.values())
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, std::string(what) + " is not finite");
}

}  // namespace

Field log_density(const HybridState& s, const Regularization& reg) {
  const Field& P = s.P();
  Field L(s.grid());
  const double floor = reg.enabled ? reg.floor_rel * max_of(P) : 0.0;
  for (std::size_t k = 0; k < P.size(); ++k) L[k] = std::log(std::max(P[k], floor));
  return L;
}

Field fisher_integrand(const HybridState& s, const Regularization& reg) {
  const auto& g = s.grid();
  const Field Lq = d1(log_density(s, reg), g, Axis::q);
  const Field m = mask_of(s, reg);
  Field out(g);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = m[k] == 0.0 ? 0.0 : s.P()[k] * Lq[k] * Lq[k];
  require_finite(out, "quantum pressure integrand");
  return out;
}

Field fisher_variation(const HybridState& s, const Regularization& reg) {
  const auto& g = s.grid();
  const Field& P = s.P();
  const Field Lq = d1(log_density(s, reg), g, Axis::q);
  const Field m = mask_of(s, reg);
  Field w(g);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = m[k] == 0.0 ? 0.0 : P[k] * Lq[k];
  const Field adj = d1_adjoint(w, g, Axis::q);
  const double floor = reg.enabled ? reg.floor_rel * max_of(P) : 0.0;
  Field out(g);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double local = m[k] == 0.0 ? 0.0 : Lq[k] * Lq[k];
    out[k] = local + (adj[k] == 0.0 ? 0.0 : 2.0 * adj[k] / std::max(P[k], floor));
  }
  require_finite(out, "quantum potential");
  return out;
}

double quantum_sector_energy(const HybridState& s, const HamiltonianParams& params) {
  const auto& g = s.grid();
  const Field Sq = d1(s.S(), g, Axis::q);
  const Field Vq = quantum_potential_field(g, params);
  const Field F = fisher_integrand(s, params.regularization);
  const double c = params.hbar * params.hbar / (8.0 * params.m_q);
  Field e(g);
  for (std::size_t k = 0; k < e.size(); ++k)
    e[k] = s.P()[k] * (Sq[k] * Sq[k] / (2.0 * params.m_q) + Vq[k]) + c * F[k];
  return integrate(e, g);
}

double classical_sector_energy(const HybridState& s, const HamiltonianParams& params) {
  const auto& g = s.grid();
  const Field Sx = d1(s.S(), g, Axis::x);
  const Field Vx = classical_potential_field(g, params);
  Field e(g);
  for (std::size_t k = 0; k < e.size(); ++k)
    e[k] = s.P()[k] * (Sx[k] * Sx[k] / (2.0 * params.m_x) + Vx[k]);
  return integrate(e, g);
}

double interaction_energy(const HybridState& s, const HamiltonianParams& params, double t) {
  const double lambda = params.lambda_at(t);
  if (lambda == 0.0) return 0.0;
  return lambda * integrate_product(s.P(), coupling_field(s.grid(), params), s.grid());
}

double ensemble_energy(const HybridState& s, const HamiltonianParams& params, double t) {
  const auto& g = s.grid();
  const Field Sq = d1(s.S(), g, Axis::q);
  const Field Sx = d1(s.S(), g, Axis::x);
  const Field V = potential_field(g, params, t);
  const Field F = fisher_integrand(s, params.regularization);
  const double c = params.hbar * params.hbar / (8.0 * params.m_q);
  Field e(g);
  for (std::size_t k = 0; k < e.size(); ++k)
    e[k] = s.P()[k] * (Sq[k] * Sq[k] / (2.0 * params.m_q) + Sx[k] * Sx[k] / (2.0 * params.m_x) + V[k]) +
           c * F[k];
  const double E = integrate(e, g);
  if (!std::isfinite(E)) throw Error(ErrorCode::NonFinite, "ensemble energy");
  return E;
}

Field delta_H_delta_S(const HybridState& s, const HamiltonianParams& params, double /*t*/) {
  const auto& g = s.grid();
  const Field Sq = d1(s.S(), g, Axis::q);
  const Field Sx = d1(s.S(), g, Axis::x);
  Field fq(g), fx(g);
  for (std::size_t k = 0; k < fq.size(); ++k) {
    fq[k] = s.P()[k] * Sq[k] / params.m_q;
    fx[k] = s.P()[k] * Sx[k] / params.m_x;
  }
  Field out = d1_adjoint(fq, g, Axis::q);
  const Field ax = d1_adjoint(fx, g, Axis::x);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += ax[k];
  return out;
}

Field delta_H_delta_P(const HybridState& s, const HamiltonianParams& params, double t) {
  const auto& g = s.grid();
  const Field Sq = d1(s.S(), g, Axis::q);
  const Field Sx = d1(s.S(), g, Axis::x);
  const Field V = potential_field(g, params, t);
  const Field Fv = fisher_variation(s, params.regularization);
  const double c = params.hbar * params.hbar / (8.0 * params.m_q);
  Field out(g);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = Sq[k] * Sq[k] / (2.0 * params.m_q) + Sx[k] * Sx[k] / (2.0 * params.m_x) + V[k] + c * Fv[k];
  return out;
}

}  // namespace hybrid
