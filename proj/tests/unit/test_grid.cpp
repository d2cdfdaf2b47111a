#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "hybrid/checkpoint.hpp"
#include "hybrid/grid.hpp"
#include "hybrid/stencil.hpp"
#include "support.hpp"

#include <sstream>

using namespace hybrid;
using hybrid::testing::normal_pdf;
using hybrid::testing::square_grid;

TEST_CASE("grid geometry is cell centred") {
  GridSpec g = square_grid(16, -4.0, 4.0);
  CHECK(g.dq() == doctest::Approx(0.5));
  CHECK(g.q(0) == doctest::Approx(-3.75));
  CHECK(g.x(15) == doctest::Approx(3.75));
  CHECK(g.size() == 256);
  g.validate();
  g.n_q = 0;
  CHECK_THROWS_AS(g.validate(), Error);
  g = square_grid(16);
  g.x_max = g.x_min;
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("compensated sum recovers cancelled small terms") {
  const std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  CHECK(compensated_sum(v) == 2.0);
}

TEST_CASE("midpoint quadrature of a Gaussian converges spectrally") {
  const GridSpec g = square_grid(96, -12.0, 12.0);
  const Field f = tabulate(g, [](double q, double x) { return normal_pdf(q - 0.3, 0.7) * normal_pdf(x + 0.2, 1.3); });
  CHECK(integrate(f, g) == doctest::Approx(1.0).epsilon(1e-12));
  const Field q2 = tabulate(g, [](double q, double) { return q * q; });
  CHECK(integrate_product(f, q2, g) == doctest::Approx(0.7 + 0.09).epsilon(1e-12));
}

TEST_CASE("state construction validates and normalises") {
  const GridSpec g = square_grid(16);
  Field P(g, 2.0), S(g, 0.0);
  const HybridState s = HybridState::make(g, P, S);
  CHECK(s.mass() == doctest::Approx(1.0));
  CHECK(s.rescale_factor() == doctest::Approx(1.0 / (2.0 * 256.0)));

  Field neg = P;
  neg(3, 4) = -1.0;
  CHECK_THROWS_AS(HybridState::make(g, neg, S), Error);
  Field nan = P;
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(HybridState::make(g, nan, S), Error);
  try {
    HybridState::make(g, Field(g, 0.0), S);
    FAIL("zero mass accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroMass);
  }
}

TEST_CASE("marginals and separability of product and correlated states") {
  const GridSpec g = square_grid(64);
  const Field prod = tabulate(g, [](double q, double x) { return normal_pdf(q, 1.0) * normal_pdf(x - 1.0, 0.5); });
  const HybridState s = HybridState::make(g, prod, Field(g));
  const Marginals m = marginals(s);
  double tot = 0.0;
  for (double v : m.P_x) tot += v * g.dx();
  CHECK(tot == doctest::Approx(1.0));
  CHECK(m.P_q[32] == doctest::Approx(normal_pdf(g.q(32), 1.0)).epsilon(1e-10));
  CHECK(separability_defect(s) < 1e-12);

  // Correlation coefficient 0.5: the defect is strictly positive.
  const Field corr = tabulate(g, [](double q, double x) { return std::exp(-(q * q - q * x + x * x) / 1.5); });
  CHECK(separability_defect(HybridState::make(g, corr, Field(g))) > 0.1);
}

TEST_CASE("stencils are exact on quadratics, including boundary rows") {
  for (Boundary b : {Boundary::truncated}) {
    GridSpec g = square_grid(12, -1.0, 2.0);
    g.boundary = b;
    const Field f = tabulate(g, [](double q, double x) { return 1.0 + 2.0 * q - 3.0 * q * q + 0.5 * q * x + x * x; });
    const Field fq = d1(f, g, Axis::q), fqq = d2(f, g, Axis::q);
    const Field fx = d1(f, g, Axis::x), fxx = d2(f, g, Axis::x);
    for (int i = 0; i < g.n_q; ++i)
      for (int j = 0; j < g.n_x; ++j) {
        const double q = g.q(i), x = g.x(j);
        CHECK(fq(i, j) == doctest::Approx(2.0 - 6.0 * q + 0.5 * x).epsilon(1e-12).scale(1.0));
        CHECK(fqq(i, j) == doctest::Approx(-6.0).epsilon(1e-12));
        CHECK(fx(i, j) == doctest::Approx(0.5 * q + 2.0 * x).epsilon(1e-12).scale(1.0));
        CHECK(fxx(i, j) == doctest::Approx(2.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("interior stencils converge at fourth order") {
  auto err = [](int n) {
    const GridSpec g = square_grid(n, -3.0, 3.0);
    const Field f = tabulate(g, [](double q, double) { return std::sin(q); });
    const Field fq = d1(f, g, Axis::q), fqq = d2(f, g, Axis::q);
    double e1 = 0.0, e2 = 0.0;
    for (int i = 4; i < n - 4; ++i) {
      e1 = std::max(e1, std::abs(fq(i, 0) - std::cos(g.q(i))));
      e2 = std::max(e2, std::abs(fqq(i, 0) + std::sin(g.q(i))));
    }
    return std::pair{e1, e2};
  };
  const auto [a1, a2] = err(32);
  const auto [b1, b2] = err(64);
  CHECK(std::log2(a1 / b1) > 3.7);
  CHECK(std::log2(a2 / b2) > 3.7);
}

TEST_CASE("adjoint first derivative is the exact matrix transpose") {
  GridSpec g = square_grid(20, -2.0, 2.0);
  g.n_x = 9;
  const Field u = tabulate(g, [](double q, double x) { return std::cos(1.3 * q + x) + q * q; });
  const Field v = tabulate(g, [](double q, double x) { return std::exp(-q * q) * (1.0 + x); });
  for (Axis a : {Axis::q, Axis::x}) {
    const Field dv = d1(v, g, a), dtu = d1_adjoint(u, g, a);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      lhs += u[k] * dv[k];
      rhs += dtu[k] * v[k];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
  // Interior rows: the transpose of an antisymmetric stencil is its negative.
  const Field du = d1(u, g, Axis::q), dtu = d1_adjoint(u, g, Axis::q);
  CHECK(dtu(10, 4) == doctest::Approx(-du(10, 4)).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is exact") {
  const GridSpec g = square_grid(8, -2.0, 3.0);
  const Field P = tabulate(g, [](double q, double x) { return std::exp(-q * q - 0.3 * x * x) + 1e-300; });
  const Field S = tabulate(g, [](double q, double x) { return 0.1 * q * x + std::sqrt(2.0) * x; });
  const HybridState s = HybridState::make(g, P, S);
  std::stringstream ss;
  write_checkpoint(ss, s);
  const HybridState r = read_checkpoint(ss);
  CHECK(r.grid() == g);
  CHECK(r.P() == s.P());
  CHECK(r.S() == s.S());

  std::stringstream bad("not a checkpoint\n");
  CHECK_THROWS_AS(read_checkpoint(bad), Error);
}
