#include <doctest.h>

#include <cmath>

#include "hybrid/gaussian.hpp"
#include "hybrid/observables.hpp"
#include "hybrid/random_states.hpp"
#include "support.hpp"

using namespace hybrid;
using namespace hybrid::testing;

TEST_CASE("phase polynomials evaluate, differentiate and combine") {
  PhasePolynomial f = PhasePolynomial::monomial(2, 1, 3.0);  // 3 x^2 p
  f += PhasePolynomial::monomial(0, 2);                       // + p^2
  CHECK(f(2.0, 0.5) == doctest::Approx(3 * 4 * 0.5 + 0.25));
  CHECK(f.dp(2.0, 0.5) == doctest::Approx(12.0 + 1.0));
  CHECK(f.derivative_x()(2.0, 0.5) == doctest::Approx(6 * 2 * 0.5));
  CHECK(f.depends_on_momentum());
  CHECK_FALSE(PhasePolynomial::monomial(3, 0).depends_on_momentum());
  CHECK((f * 2.0)(1.0, 1.0) == doctest::Approx(8.0));
}

TEST_CASE("Gaussian expectations match closed forms") {
  const double hbar = 0.9, m_q = 1.7;
  GaussianMoments m = gaussian(0.4, -0.3, 0.8, 0.6, 0.2);
  m.S_grad << 0.5, -0.7;
  m.S_hess << 0.3, 0.1, 0.1, -0.2;
  HamiltonianParams p = free_params(m_q, 1.0);
  p.hbar = hbar;
  p.potential.V_q.poly = {0.0, 1.0, 0.25};
  const HybridState s = moments_to_state(m, square_grid(192, -10.0, 10.0), hbar);

  // p = g + K (r - mean); momentum moments follow from the covariance.
  const Eigen::Matrix2d C = m.S_hess * m.Sigma * m.S_hess.transpose();
  const double pq2 = m.S_grad(0) * m.S_grad(0) + C(0, 0) + hbar * hbar / 4.0 * m.Sigma.inverse()(0, 0);
  const double px2 = m.S_grad(1) * m.S_grad(1) + C(1, 1);
  const double xpx = m.mean(1) * m.S_grad(1) + (m.S_hess * m.Sigma)(1, 1);

  CHECK(expectation(s, obs::q(), p) == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(expectation(s, obs::q2(), p) == doctest::Approx(0.8 + 0.16).epsilon(1e-10));
  CHECK(expectation(s, obs::p_q(), p) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(expectation(s, obs::p_q2(), p) == doctest::Approx(pq2).epsilon(1e-9));
  CHECK(expectation(s, obs::kinetic_q(), p) == doctest::Approx(pq2 / (2 * m_q)).epsilon(1e-9));
  CHECK(expectation(s, obs::potential_q(), p) == doctest::Approx(0.4 + 0.25 * 0.96).epsilon(1e-10));
  CHECK(expectation(s, obs::x(), p) == doctest::Approx(-0.3).epsilon(1e-10));
  CHECK(expectation(s, obs::x2(), p) == doctest::Approx(0.6 + 0.09).epsilon(1e-10));
  CHECK(expectation(s, obs::p_x(), p) == doctest::Approx(-0.7).epsilon(1e-10));
  CHECK(expectation(s, obs::p_x2(), p) == doctest::Approx(px2).epsilon(1e-9));
  CHECK(expectation(s, obs::x_p_x(), p) == doctest::Approx(xpx).epsilon(1e-9));

  const auto [pm, p2] = classical_momentum_moments(s);
  CHECK(pm == doctest::Approx(-0.7).epsilon(1e-10));
  CHECK(p2 == doctest::Approx(px2).epsilon(1e-9));
}

TEST_CASE("(P, S) operators converge to the spectral wavefunction route") {
  HamiltonianParams p;
  p.potential.V_q.poly = {0.2, -0.1, 0.3};
  const auto gap = [&](int n, const Observable& o) {
    std::mt19937_64 rng(11);
    const HybridState s = random_smooth_state(sweep_grid(n), rng);
    return std::abs(quantum_expectation(s, o, p) - wavefunction_expectation(s, o, p));
  };
  // Multiplicative operators coincide; derivative operators differ by the
  // fourth-order stencil error.
  for (const Observable& o : {obs::q(), obs::q2(), obs::potential_q()}) {
    CAPTURE(o.label);
    CHECK(gap(64, o) < 1e-13);
  }
  for (const Observable& o : {obs::p_q(), obs::p_q2(), obs::kinetic_q()}) {
    CAPTURE(o.label);
    const double coarse = gap(128, o), fine = gap(256, o);
    CHECK(fine < 1e-6);
    CHECK(std::log2(coarse / fine) > 3.5);
  }
}

TEST_CASE("observable kinds are enforced") {
  const HybridState s = moments_to_state(gaussian(0, 0, 1, 1), square_grid(64), 1.0);
  const HamiltonianParams p;
  CHECK_THROWS_AS(classical_expectation(s, obs::q()), Error);
  CHECK_THROWS_AS(quantum_expectation(s, obs::x(), p), Error);
  CHECK_THROWS_AS(wavefunction_expectation(s, obs::x2(), p), Error);
  CHECK(obs::x2().directly_measurable());
  CHECK_FALSE(obs::p_x().directly_measurable());
  CHECK_FALSE(obs::q().is_classical());
}
