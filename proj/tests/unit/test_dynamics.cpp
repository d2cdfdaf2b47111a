#include <doctest.h>
#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "hybrid/brackets.hpp"
#include "hybrid/dynamics.hpp"
#include "hybrid/gaussian.hpp"
#include "hybrid/random_states.hpp"
#include "support.hpp"

using namespace hybrid;
using namespace hybrid::testing;

namespace {

// Reference for a free quantum particle in a quadratic well: Strang split-step
// Fourier propagation of psi(q) on a periodic grid, hbar = 1.
class SplitStep {
 public:
  SplitStep(std::vector<std::complex<double>> psi, double q_min, double q_max, double mass, double a2)
      : n_(static_cast<int>(psi.size())), psi_(std::move(psi)), mass_(mass), a2_(a2) {
    h_ = (q_max - q_min) / n_;
    q_min_ = q_min;
    auto* d = reinterpret_cast<fftw_complex*>(psi_.data());
    fwd_ = fftw_plan_dft_1d(n_, d, d, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(n_, d, d, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~SplitStep() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  void run(double t, int steps) {
    const double dt = t / steps;
    for (int s = 0; s < steps; ++s) {
      potential(dt / 2);
      fftw_execute(fwd_);
      const double L = n_ * h_;
      for (int k = 0; k < n_; ++k) {
        const double kk = 2 * std::numbers::pi * (k <= n_ / 2 ? k : k - n_) / L;
        psi_[k] *= std::exp(std::complex<double>(0.0, -kk * kk / (2 * mass_) * dt)) / double(n_);
      }
      fftw_execute(bwd_);
      potential(dt / 2);
    }
  }

  double density(int i) const { return std::norm(psi_[i]); }

 private:
  void potential(double dt) {
    for (int i = 0; i < n_; ++i) {
      const double q = q_min_ + (i + 0.5) * h_;
      psi_[i] *= std::exp(std::complex<double>(0.0, -a2_ * q * q * dt));
    }
  }

  int n_;
  std::vector<std::complex<double>> psi_;
  double mass_, a2_, h_, q_min_;
  fftw_plan fwd_, bwd_;
};

double ln_psi_q(double q) { return -0.5 * q * q + 0.3 * q + 0.5 * std::exp(-0.5 * q * q); }
double ln_rho_x(double x) { return -0.5 * (x - 0.5) * (x - 0.5) + 0.4 * std::exp(-(x - 0.5) * (x - 0.5)); }

}  // namespace

TEST_CASE("stability bound and explicit steps") {
  const GridSpec g = square_grid(64);
  HamiltonianParams p = free_params(2.0, 0.5);
  const double h = g.dq();
  CHECK(stability_bound(g, p, 0.1) == doctest::Approx(0.1 * h * h * 0.5));
  IntegratorSpec spec;
  CHECK(resolve_dt(spec, g, p) == doctest::Approx(0.1 * h * h * 0.5));
  spec.dt = 1.0;
  try {
    resolve_dt(spec, g, p);
    FAIL("oversized step accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StabilityBound);
  }
}

TEST_CASE("timeline snaps onto samples and window edges") {
  const Timeline tl = make_timeline(0.0, 1.0, 0.25, {{0.1, 0.6, 1.0}});
  const std::vector<double> expect{0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 1.0};
  REQUIRE(tl.events.size() == expect.size());
  for (std::size_t k = 0; k < expect.size(); ++k) CHECK(tl.events[k] == doctest::Approx(expect[k]));
  CHECK(tl.sample[0]);
  CHECK_FALSE(tl.sample[1]);
  CHECK_FALSE(tl.sample[4]);
  CHECK(tl.sample[6]);
}

TEST_CASE("log-field conversion round trips") {
  std::mt19937_64 rng(2);
  const HybridState s = random_smooth_state(sweep_grid(32), rng);
  const LogFields y = to_log_fields(s, Regularization{});
  double mass = 0.0;
  const HybridState r = to_state(y, s.grid(), &mass);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 0; k < s.P().size(); k += 97) CHECK(r.P()[k] == doctest::Approx(s.P()[k]).epsilon(1e-12));
  CHECK(r.S() == s.S());
}

TEST_CASE("filter and tail relaxation leave Gaussian states untouched") {
  GaussianMoments m = gaussian(0.3, 1.0, 0.6, 0.4, 0.1);
  m.S_grad << 0.2, -0.4;
  m.S_hess << 0.3, 0.05, 0.05, -0.1;
  const GridSpec g = square_grid(96, -9.0, 9.0);
  const HybridState s = moments_to_state(m, g, 1.0);
  HamiltonianParams p = free_params();
  GridSolver solver(g, p);
  const LogFields y0 = to_log_fields(s, p.regularization);
  LogFields y = y0;
  solver.filter(y, 1e-3, 50.0);
  solver.relax_tails(y, 10.0);
  double dL = 0.0, dS = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < y.L.size(); ++k) {
    dL = std::max(dL, std::abs(y.L[k] - y0.L[k]));
    dS = std::max(dS, std::abs(y.S[k] - y0.S[k]));
    scale = std::max(scale, std::abs(y0.L[k]));
  }
  CHECK(dL < 1e-9 * scale);
  CHECK(dS < 1e-9 * scale);
}

TEST_CASE("free evolution of a Gaussian follows the moment equations") {
  HamiltonianParams p = free_params(1.0, 1.0);
  p.potential.V_q.poly = {0.0, 0.0, 0.5};
  const GaussianMoments m = gaussian(0.0, 1.0, 0.5, 0.5);
  const GridSpec g = square_grid(128, -10.0, 10.0);
  const Evolution e = evolve(moments_to_state(m, g, 1.0), p, IntegratorSpec{}, 0.0, 0.5, 0.25);
  const auto ref = evolve_moments(m, p, 1e-3, 500);
  const GaussianMoments got = state_to_moments(e.final_state);
  CHECK(got.Sigma(1, 1) == doctest::Approx(ref.back().Sigma(1, 1)).epsilon(1e-7));
  CHECK(got.Sigma(0, 0) == doctest::Approx(ref.back().Sigma(0, 0)).epsilon(1e-7));
  // Uncoupled and without momentum spread, the classical width cannot change.
  CHECK(got.Sigma(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(e.record.samples.size() == 3);
  CHECK(std::abs(e.record.samples.back().norm - 1.0) < 1e-12);
}

namespace {

struct ProductErrors {
  double q = 0.0;    // max |P_q - reference| / max P_q
  double x = 0.0;    // same for P_x
  double sep = 0.0;  // separability defect at the end
};

// Non-Gaussian q factor in a harmonic well and non-Gaussian x factor carried
// along straight characteristics with momentum 0.8, uncoupled, to t = 0.3.
ProductErrors product_errors(const IntegratorSpec& spec) {
  const double m_q = 1.0, m_x = 1.0, p0 = 0.8, T = 0.3;
  GridSpec g;
  g.q_min = -8.0;
  g.q_max = 8.0;
  g.n_q = 128;
  g.x_min = -6.0;
  g.x_max = 8.0;
  g.n_x = 168;
  HamiltonianParams p = free_params(m_q, m_x);
  p.potential.V_q.poly = {0.0, 0.0, 0.5};

  const Field P = tabulate(g, [](double q, double x) { return std::exp(2 * ln_psi_q(q) + ln_rho_x(x)); });
  const Field S = tabulate(g, [&](double, double x) { return p0 * x; });
  const Evolution e = evolve(HybridState::make(g, P, S), p, spec, 0.0, T, T);
  const Marginals mg = marginals(e.final_state);

  std::vector<std::complex<double>> psi(g.n_q);
  for (int i = 0; i < g.n_q; ++i) psi[i] = std::exp(ln_psi_q(g.q(i)));
  SplitStep ref(psi, g.q_min, g.q_max, m_q, 0.5);
  ref.run(T, 4000);
  double norm = 0.0;
  for (int i = 0; i < g.n_q; ++i) norm += ref.density(i) * g.dq();
  ProductErrors out;
  double peak = 0.0;
  for (int i = 0; i < g.n_q; ++i) {
    out.q = std::max(out.q, std::abs(mg.P_q[i] - ref.density(i) / norm));
    peak = std::max(peak, ref.density(i) / norm);
  }
  out.q /= peak;

  double rho_norm = 0.0;
  for (int j = 0; j < g.n_x; ++j) rho_norm += std::exp(ln_rho_x(g.x(j))) * g.dx();
  peak = 0.0;
  for (int j = 0; j < g.n_x; ++j) {
    const double exact = std::exp(ln_rho_x(g.x(j) - p0 * T / m_x)) / rho_norm;
    out.x = std::max(out.x, std::abs(mg.P_x[j] - exact));
    peak = std::max(peak, exact);
  }
  out.x /= peak;
  out.sep = separability_defect(e.final_state);
  return out;
}

}  // namespace

TEST_CASE("uncoupled product evolution matches split-step quantum and ballistic classical references") {
  SUBCASE("bare integrator") {
    IntegratorSpec spec;
    spec.stabilize = false;
    const ProductErrors e = product_errors(spec);
    CHECK(e.q < 1e-5);
    CHECK(e.x < 1e-5);
    // Every stencil acts along one axis, so a product stays a product.
    CHECK(e.sep < 1e-12);
  }
  SUBCASE("stabilised integrator") {
    // The filter and the tail sponge depend on both coordinates and reshape
    // tails more than ten e-folds down, so the bound is looser.
    const ProductErrors e = product_errors(IntegratorSpec{});
    CHECK(e.q < 5e-5);
    CHECK(e.x < 5e-5);
    CHECK(e.sep < 5e-5);
  }
}

TEST_CASE("d^2<x^2>/dt^2 of a non-Gaussian state equals the bracket sum") {
  // Classical sector free, quantum sector in a well, coupling off.
  HamiltonianParams p = free_params(1.3, 0.8);
  p.potential.V_q.poly = {0.0, 0.0, 0.5};
  GridSpec g = square_grid(128, -9.0, 9.0);
  const Field P = tabulate(g, [](double q, double x) {
    return std::exp(-0.6 * q * q - 0.05 * std::pow(q, 4) - 0.4 * x * x + 0.3 * q * x - 0.1 * q * q * x);
  });
  const Field S = tabulate(g, [](double q, double x) { return 0.2 * q * x + 0.3 * x + 0.1 * q * q; });
  const HybridState s = HybridState::make(g, P, S);
  const SecondDerivativeTerms t = second_derivative_decomposition(s, p);

  IntegratorSpec spec;
  spec.stabilize = false;
  const double h = 0.004;
  std::vector<double> x2;
  HybridState cur = s;
  x2.push_back(expectation(cur, obs::x2(), p));
  // <x^2> at -2h .. 2h; backward steps by time reversal are unavailable, so
  // use a one-sided fourth-order formula on t = 0 .. 5h.
  for (int k = 1; k <= 5; ++k) {
    cur = evolve(cur, p, spec, (k - 1) * h, k * h, h).final_state;
    x2.push_back(expectation(cur, obs::x2(), p));
  }
  const double fd = (45 * x2[0] - 154 * x2[1] + 214 * x2[2] - 156 * x2[3] + 61 * x2[4] - 10 * x2[5]) / (12 * h * h);
  CHECK(t.sum() == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("evolution refuses non-finite fields") {
  const GridSpec g = square_grid(32);
  const HybridState s = moments_to_state(gaussian(0, 0, 1, 1), g, 1.0);
  HamiltonianParams p = free_params();
  IntegratorSpec spec;
  spec.dt = 1e30;
  CHECK_THROWS_AS(step(s, p, spec, 0.0), Error);
}
