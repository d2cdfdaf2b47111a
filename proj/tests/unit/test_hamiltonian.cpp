#include <doctest.h>

#include <cmath>

#include "hybrid/brackets.hpp"
#include "hybrid/gaussian.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/random_states.hpp"
#include "support.hpp"

using namespace hybrid;
using namespace hybrid::testing;

TEST_CASE("interaction windows are half open and validated") {
  HamiltonianParams p;
  p.schedule = {{0.0, 1.0, 2.0}, {1.5, 2.0, -1.0}};
  p.validate();
  CHECK(p.lambda_at(-0.1) == 0.0);
  CHECK(p.lambda_at(0.0) == 2.0);
  CHECK(p.lambda_at(0.999) == 2.0);
  CHECK(p.lambda_at(1.0) == 0.0);
  CHECK(p.lambda_at(1.7) == -1.0);
  CHECK(p.lambda_at(2.0) == 0.0);

  HamiltonianParams overlap = p;
  overlap.schedule = {{0.0, 1.0, 1.0}, {0.5, 2.0, 1.0}};
  CHECK_THROWS_AS(overlap.validate(), Error);
  HamiltonianParams empty = p;
  empty.schedule = {{1.0, 1.0, 1.0}};
  CHECK_THROWS_AS(empty.validate(), Error);
  HamiltonianParams massless = p;
  massless.m_q = 0.0;
  CHECK_THROWS_AS(massless.validate(), Error);
}

TEST_CASE("potential field is V_q + V_x + lambda q x") {
  const GridSpec g = square_grid(8, -2.0, 2.0);
  HamiltonianParams p;
  p.potential.V_q.poly = {0.1, 0.2, 0.3};
  p.potential.V_x.poly = {0.0, -1.0, 0.5};
  p.schedule = {{0.0, 1.0, 0.7}};
  const Field on = potential_field(g, p, 0.5), off = potential_field(g, p, 1.5);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) {
      const double q = g.q(i), x = g.x(j);
      const double base = 0.1 + 0.2 * q + 0.3 * q * q - x + 0.5 * x * x;
      CHECK(off(i, j) == doctest::Approx(base));
      CHECK(on(i, j) == doctest::Approx(base + 0.7 * q * x));
    }
}

TEST_CASE("ensemble energy of a Gaussian matches the closed form") {
  // P = N(q0, sqq) N(x0, sxx) with correlation, S = k q^2 / 2 + p x.
  const double hbar = 0.8, m_q = 1.3, m_x = 0.7, lambda = 0.4;
  GaussianMoments m = gaussian(0.2, 0.5, 0.6, 0.9, 0.15);
  m.S_grad << 0.0, 0.3;
  m.S_hess << 0.25, 0.0, 0.0, 0.0;
  HamiltonianParams p = free_params(m_q, m_x);
  p.hbar = hbar;
  p.potential.V_q.poly = {0.0, 0.0, 0.5};
  p.potential.V_x.poly = {0.0, 0.1, 0.0};
  p.schedule = {{0.0, 1.0, lambda}};
  const HybridState s = moments_to_state(m, square_grid(160, -9.0, 9.0), hbar);

  const Eigen::Matrix2d Lambda = m.Sigma.inverse();
  const double pq2 = 0.25 * 0.25 * m.Sigma(0, 0);  // <(k (q - q0))^2>
  const double q2 = m.Sigma(0, 0) + 0.04;
  const double fisher_q = Lambda(0, 0);  // <(d_q ln P)^2>
  const double Hq = pq2 / (2 * m_q) + 0.5 * q2 + hbar * hbar / (8 * m_q) * fisher_q;
  const double Hc = 0.09 / (2 * m_x) + 0.1 * 0.5;
  const double Hi = lambda * (m.Sigma(0, 1) + 0.2 * 0.5);

  CHECK(quantum_sector_energy(s, p) == doctest::Approx(Hq).epsilon(1e-9));
  CHECK(classical_sector_energy(s, p) == doctest::Approx(Hc).epsilon(1e-9));
  CHECK(interaction_energy(s, p, 0.5) == doctest::Approx(Hi).epsilon(1e-9));
  CHECK(interaction_energy(s, p, 1.5) == 0.0);
  CHECK(ensemble_energy(s, p, 0.5) == doctest::Approx(Hq + Hc + Hi).epsilon(1e-9));
}

TEST_CASE("closed-form energy derivatives predict the change along smooth perturbations") {
  std::mt19937_64 rng(7);
  const HybridState s = random_smooth_state(sweep_grid(48), rng);
  const GridSpec& g = s.grid();
  HamiltonianParams p = free_params(1.4, 0.6);
  p.hbar = 1.1;
  p.potential.V_q.poly = {0.0, 0.2, 0.4};
  p.potential.V_x.poly = {0.0, 0.0, -0.1};
  p.schedule = {{0.0, 1.0, 0.5}};
  const Field dP = delta_H_delta_P(s, p, 0.5), dS = delta_H_delta_S(s, p, 0.5);

  // Relative density perturbation and an additive phase perturbation.
  const Field u = tabulate(g, [](double q, double x) { return std::sin(0.7 * q) + 0.5 * std::cos(0.4 * x + q); });
  const Field v = tabulate(g, [](double q, double x) { return 0.3 * q * x + std::sin(x); });
  Field vP(g);
  for (std::size_t k = 0; k < vP.size(); ++k) vP[k] = s.P()[k] * u[k];
  const auto shifted = [&](double eps) {
    Field P = s.P(), S = s.S();
    for (std::size_t k = 0; k < P.size(); ++k) {
      P[k] += eps * vP[k];
      S[k] += eps * v[k];
    }
    return ensemble_energy(HybridState::unnormalized(g, P, S), p, 0.5);
  };
  const double eps = 1e-5;
  const double numeric = (shifted(eps) - shifted(-eps)) / (2 * eps);
  const double predicted = integrate_product(dP, vP, g) + integrate_product(dS, v, g);
  CHECK(predicted == doctest::Approx(numeric).epsilon(1e-7));

  // Probability is conserved: the S-derivative sums to zero exactly.
  double sum = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < dS.size(); ++k) {
    sum += dS[k];
    scale = std::max(scale, std::abs(dS[k]));
  }
  CHECK(std::abs(sum) < 1e-12 * scale * dS.size());
}

TEST_CASE("fisher variation converges to minus the quantum pressure terms") {
  // ln P = -q^2/1.2 - 0.025 q^4 - x^2/2; compare on |q| <= 3 at two resolutions.
  const auto worst = [](int n) {
    const GridSpec g = square_grid(n);
    const Field P = tabulate(g, [](double q, double x) { return std::exp(-q * q / 1.2 - 0.025 * std::pow(q, 4) - x * x / 2); });
    const Field v = fisher_variation(HybridState::make(g, P, Field(g)), Regularization{});
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      const double q = g.q(i);
      if (std::abs(q) > 3.0) continue;
      const double Lq = -q / 0.6 - 0.1 * q * q * q, Lqq = -1.0 / 0.6 - 0.3 * q * q;
      e = std::max(e, std::abs(v(i, n / 2) + Lq * Lq + 2 * Lqq));
    }
    return e;
  };
  const double coarse = worst(128), fine = worst(256);
  CHECK(fine < 0.05);
  CHECK(std::log2(coarse / fine) > 3.5);
}
