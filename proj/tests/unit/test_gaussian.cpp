#include <doctest.h>

#include <cmath>

#include "hybrid/gaussian.hpp"
#include "support.hpp"

using namespace hybrid;
using namespace hybrid::testing;

TEST_CASE("moments survive realisation on the grid") {
  GaussianMoments m = gaussian(-0.5, 0.8, 0.7, 0.4, -0.2);
  m.S_grad << 0.3, -1.1;
  m.S_hess << 0.2, 0.15, 0.15, -0.4;
  const GaussianMoments r = state_to_moments(moments_to_state(m, square_grid(160, -8.0, 8.0), 1.0));
  CHECK((r.mean - m.mean).norm() < 1e-10);
  CHECK((r.Sigma - m.Sigma).norm() < 1e-10);
  CHECK((r.S_grad - m.S_grad).norm() < 1e-10);
  CHECK((r.S_hess - m.S_hess).norm() < 1e-10);
}

TEST_CASE("realisation needs six standard deviations of room") {
  const GaussianMoments m = gaussian(0.0, 0.0, 2.0, 1.0);
  try {
    moments_to_state(m, square_grid(64, -5.0, 5.0), 1.0);
    FAIL("narrow domain accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainTooSmall);
  }
  GaussianMoments bad = m;
  bad.Sigma(0, 1) = bad.Sigma(1, 0) = 5.0;
  CHECK_FALSE(bad.valid());
}

TEST_CASE("moment flow rejects tabulated potentials") {
  HamiltonianParams p;
  p.potential.V_q.table = std::vector<double>(8, 0.0);
  CHECK_THROWS_AS(derive_moment_flow(p), Error);
}

TEST_CASE("free quantum wavepacket spreads as sigma^2 + (hbar t / 2 m sigma)^2") {
  const double hbar = 0.7, m_q = 1.6, s2 = 0.45, T = 1.5;
  HamiltonianParams p = free_params(m_q, 2.0);
  p.hbar = hbar;
  const auto traj = evolve_moments(gaussian(0.0, 0.0, s2, 0.3), p, 1e-3, 1500);
  const double expect = s2 + std::pow(hbar * T / (2.0 * m_q), 2) / s2;
  CHECK(traj.size() == 1501);
  CHECK(traj.back().Sigma(0, 0) == doctest::Approx(expect).epsilon(1e-10));
  CHECK(traj.back().Sigma(1, 1) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("harmonic ground state is stationary and coherent states oscillate") {
  HamiltonianParams p = free_params();
  p.potential.V_q.poly = {0.0, 0.0, 0.5};
  const auto g = evolve_moments(gaussian(0.0, 0.0, 0.5, 0.5), p, 1e-3, 2000);
  CHECK(g.back().Sigma(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.back().S_hess(0, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const double T = std::numbers::pi / 2;
  const auto c = evolve_moments(gaussian(1.0, 1.0, 0.5, 0.5), p, T / 2000, 2000);
  CHECK(c.back().mean(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(c.back().S_grad(0) == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(c.back().Sigma(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("a classical ensemble without momentum spread focuses in a harmonic well") {
  // Sigma_xx(t) = 0.5 cos^2 t vanishes at t = pi / 2: the moment solver must
  // refuse to step through it.
  HamiltonianParams p = free_params();
  p.potential.V_x.poly = {0.0, 0.0, 0.5};
  const auto before = evolve_moments(gaussian(0.0, 0.0, 0.5, 0.5), p, 1e-3, 1000);
  CHECK(before.back().Sigma(1, 1) == doctest::Approx(0.5 * std::pow(std::cos(1.0), 2)).epsilon(1e-10));
  try {
    evolve_moments(gaussian(0.0, 0.0, 0.5, 0.5), p, 1e-3, 2000);
    FAIL("stepped through the focus");
  } catch (const hybrid::Error& e) {
    CHECK(e.code() == ErrorCode::StepFailure);
  }
}

TEST_CASE("the coupling correlates the sectors") {
  HamiltonianParams p = free_params();
  p.schedule = {{0.0, 1.0, 1.0}};
  const MomentFlow f = derive_moment_flow(p);
  const GaussianMoments d = f(gaussian(0.0, 1.0, 0.5, 0.5), 1.0);
  // d g / dt = -(v + W mean), with W = [[0, 1], [1, 0]].
  CHECK(d.S_grad(0) == doctest::Approx(-1.0));
  CHECK(d.S_grad(1) == doctest::Approx(0.0));
  CHECK(d.S_hess(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("moment samples carry closed-form columns") {
  HamiltonianParams p = free_params();
  p.potential.V_q.poly = {0.0, 0.0, 0.5};
  GaussianMoments m = gaussian(0.0, 1.0, 0.5, 0.5);
  m.S_grad << 0.0, 0.4;
  const Sample s = moments_sample(m, p, 0.0, square_grid(64, -9.0, 9.0), {});
  CHECK(s.x_mean == doctest::Approx(1.0));
  CHECK(s.x_var == doctest::Approx(0.5));
  CHECK(s.px_mean == doctest::Approx(0.4));
  CHECK(s.px2 == doctest::Approx(0.16));
  CHECK(s.pq2 == doctest::Approx(0.5));
  CHECK(s.energy == doctest::Approx(0.5 + 0.08));
}
