#include "hybrid/observables.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include "hybrid/stencil.hpp"

namespace hybrid {

PhasePolynomial PhasePolynomial::monomial(int a, int b, double coeff) {
  if (a < 0 || b < 0 || a + b > kMaxDegree) throw Error(ErrorCode::RangeError, "monomial degree exceeds 4");
  PhasePolynomial p;
  p.c[a][b] = coeff;
  return p;
}

double PhasePolynomial::operator()(double x, double p) const {
  double sum = 0.0;
  double xa = 1.0;
  for (int a = 0; a <= kMaxDegree; ++a) {
    double pb = 1.0;
    for (int b = 0; a + b <= kMaxDegree; ++b) {
      sum += c[a][b] * xa * pb;
      pb *= p;
    }
    xa *= x;
  }
  return sum;
}

double PhasePolynomial::dp(double x, double p) const {
  double sum = 0.0;
  double xa = 1.0;
  for (int a = 0; a <= kMaxDegree; ++a) {
    double pb = 1.0;
    for (int b = 1; a + b <= kMaxDegree; ++b) {
      sum += b * c[a][b] * xa * pb;
      pb *= p;
    }
    xa *= x;
  }
  return sum;
}

PhasePolynomial PhasePolynomial::derivative_x() const {
  PhasePolynomial d;
  for (int a = 1; a <= kMaxDegree; ++a)
    for (int b = 0; a + b <= kMaxDegree; ++b) d.c[a - 1][b] = a * c[a][b];
  return d;
}

bool PhasePolynomial::depends_on_momentum() const {
  for (int a = 0; a <= kMaxDegree; ++a)
    for (int b = 1; a + b <= kMaxDegree; ++b)
      if (c[a][b] != 0.0) return true;
  return false;
}

bool PhasePolynomial::is_finite() const {
  for (const auto& row : c)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  return true;
}

PhasePolynomial& PhasePolynomial::operator+=(const PhasePolynomial& o) {
  for (int a = 0; a <= kMaxDegree; ++a)
    for (int b = 0; b <= kMaxDegree; ++b) c[a][b] += o.c[a][b];
  return *this;
}

PhasePolynomial PhasePolynomial::operator*(double s) const {
  PhasePolynomial p = *this;
  for (auto& row : p.c)
    for (double& v : row) v *= s;
  return p;
}

Observable Observable::classical(PhasePolynomial poly, std::string label) {
  if (!poly.is_finite()) throw Error(ErrorCode::RangeError, "observable " + label + ": non-finite coefficient");
  Observable o;
  o.kind = poly.depends_on_momentum() ? ObservableKind::classical_phase : ObservableKind::classical_config;
  o.poly = poly;
  o.label = std::move(label);
  return o;
}

Observable Observable::quantum(QuantumOperator op, std::string label) {
  Observable o;
  o.kind = ObservableKind::quantum;
  o.op = op;
  o.label = std::move(label);
  return o;
}

namespace obs {
Observable x() { return Observable::classical(PhasePolynomial::monomial(1, 0), "x"); }
Observable x2() { return Observable::classical(PhasePolynomial::monomial(2, 0), "x2"); }
Observable p_x() { return Observable::classical(PhasePolynomial::monomial(0, 1), "px"); }
Observable p_x2() { return Observable::classical(PhasePolynomial::monomial(0, 2), "px2"); }
Observable x_p_x() { return Observable::classical(PhasePolynomial::monomial(1, 1), "x_px"); }
Observable q() { return Observable::quantum(QuantumOperator::position, "q"); }
Observable q2() { return Observable::quantum(QuantumOperator::position_squared, "q2"); }
Observable p_q() { return Observable::quantum(QuantumOperator::momentum, "pq"); }
Observable p_q2() { return Observable::quantum(QuantumOperator::momentum_squared, "pq2"); }
Observable kinetic_q() { return Observable::quantum(QuantumOperator::kinetic_energy, "kinetic_q"); }
Observable potential_q() { return Observable::quantum(QuantumOperator::potential, "potential_q"); }
}  // namespace obs

double classical_expectation(const HybridState& s, const Observable& o) {
  if (!o.is_classical()) throw Error(ErrorCode::KindMismatch, o.label + " is a quantum observable");
  const auto& g = s.grid();
  Field integrand(g);
  if (o.poly.depends_on_momentum()) {
    const Field Sx = d1(s.S(), g, Axis::x);
    for (int i = 0; i < g.n_q; ++i)
      for (int j = 0; j < g.n_x; ++j) integrand(i, j) = s.P()(i, j) * o.poly(g.x(j), Sx(i, j));
  } else {
    std::vector<double> c(g.n_x);
    for (int j = 0; j < g.n_x; ++j) c[j] = o.poly(g.x(j), 0.0);
    for (int i = 0; i < g.n_q; ++i)
      for (int j = 0; j < g.n_x; ++j) integrand(i, j) = s.P()(i, j) * c[j];
  }
  return integrate(integrand, g);
}

namespace {

double momentum_squared(const HybridState& s, const HamiltonianParams& params) {
  const auto& g = s.grid();
  const Field Sq = d1(s.S(), g, Axis::q);
  const Field F = fisher_integrand(s, params.regularization);
  const double c = params.hbar * params.hbar / 4.0;
  Field e(g);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = s.P()[k] * Sq[k] * Sq[k] + c * F[k];
  return integrate(e, g);
}

}  // namespace

double quantum_expectation(const HybridState& s, const Observable& o, const HamiltonianParams& params) {
  if (o.is_classical()) throw Error(ErrorCode::KindMismatch, o.label + " is a classical observable");
  const auto& g = s.grid();
  switch (o.op) {
    case QuantumOperator::position:
      return integrate_product(s.P(), tabulate(g, [](double q, double) { return q; }), g);
    case QuantumOperator::position_squared:
      return integrate_product(s.P(), tabulate(g, [](double q, double) { return q * q; }), g);
    case QuantumOperator::momentum:
      return integrate_product(s.P(), d1(s.S(), g, Axis::q), g);
    case QuantumOperator::momentum_squared:
      return momentum_squared(s, params);
    case QuantumOperator::kinetic_energy:
      return momentum_squared(s, params) / (2.0 * params.m_q);
    case QuantumOperator::potential:
      return integrate_product(s.P(), quantum_potential_field(g, params), g);
  }
  return 0.0;
}

double expectation(const HybridState& s, const Observable& o, const HamiltonianParams& params) {
  return o.is_classical() ? classical_expectation(s, o) : quantum_expectation(s, o, params);
}

namespace {

std::mutex fftw_planner_mutex;

// Spectral d/dq of psi, column by column.
std::vector<std::complex<double>> spectral_dq(const std::vector<std::complex<double>>& psi, const GridSpec& g) {
  const int n = g.n_q;
  const int m = g.n_x;
  std::vector<std::complex<double>> work(psi);
  auto* data = reinterpret_cast<fftw_complex*>(work.data());
  fftw_plan fwd, bwd;
  {
    std::lock_guard lock(fftw_planner_mutex);
    fwd = fftw_plan_many_dft(1, &n, m, data, nullptr, m, 1, data, nullptr, m, 1, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_many_dft(1, &n, m, data, nullptr, m, 1, data, nullptr, m, 1, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  const double length = g.q_max - g.q_min;
  for (int k = 0; k < n; ++k) {
    const int mode = k <= n / 2 ? k : k - n;
    const double kq = (2 * k == n) ? 0.0 : 2.0 * std::numbers::pi * mode / length;
    const std::complex<double> factor(0.0, kq / n);
    for (int j = 0; j < m; ++j) work[static_cast<std::size_t>(k) * m + j] *= factor;
  }
  fftw_execute(bwd);
  {
    std::lock_guard lock(fftw_planner_mutex);
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  return work;
}

}  // namespace

double wavefunction_expectation(const HybridState& s, const Observable& o, const HamiltonianParams& params) {
  if (o.is_classical()) throw Error(ErrorCode::KindMismatch, o.label + " is a classical observable");
  const auto& g = s.grid();
  const double hbar = params.hbar;
  std::vector<std::complex<double>> psi(g.size());
  for (std::size_t k = 0; k < psi.size(); ++k)
    psi[k] = std::sqrt(s.P()[k]) * std::exp(std::complex<double>(0.0, s.S()[k] / hbar));

  Field integrand(g);
  switch (o.op) {
    case QuantumOperator::position:
    case QuantumOperator::position_squared:
    case QuantumOperator::potential:
      for (int i = 0; i < g.n_q; ++i) {
        const double q = g.q(i);
        const double w = o.op == QuantumOperator::position ? q
                         : o.op == QuantumOperator::position_squared ? q * q
                                                                     : params.potential.V_q.at(i, q);
        for (int j = 0; j < g.n_x; ++j) integrand(i, j) = std::norm(psi[static_cast<std::size_t>(i) * g.n_x + j]) * w;
      }
      break;
    case QuantumOperator::momentum: {
      const auto dpsi = spectral_dq(psi, g);
      for (std::size_t k = 0; k < psi.size(); ++k) integrand[k] = hbar * (std::conj(psi[k]) * dpsi[k]).imag();
      break;
    }
    case QuantumOperator::momentum_squared:
    case QuantumOperator::kinetic_energy: {
      const auto dpsi = spectral_dq(psi, g);
      const double scale = o.op == QuantumOperator::kinetic_energy ? 1.0 / (2.0 * params.m_q) : 1.0;
      for (std::size_t k = 0; k < psi.size(); ++k) integrand[k] = scale * hbar * hbar * std::norm(dpsi[k]);
      break;
    }
  }
  return integrate(integrand, g);
}

std::pair<double, double> classical_momentum_moments(const HybridState& s) {
  const auto& g = s.grid();
  const Field Sx = d1(s.S(), g, Axis::x);
  Field p2(g);
  for (std::size_t k = 0; k < p2.size(); ++k) p2[k] = Sx[k] * Sx[k];
  return {integrate_product(s.P(), Sx, g), integrate_product(s.P(), p2, g)};
}

}  // namespace hybrid
