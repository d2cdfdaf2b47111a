#include "hybrid/random_states.hpp"

#include <algorithm>
#include <cmath>

namespace hybrid {

namespace {

double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

struct Wave {
  double amp, kq, kx, phase;
  double operator()(double q, double x) const { return amp * std::sin(kq * q + kx * x + phase); }
};

Wave random_wave(std::mt19937_64& rng, double amp) {
  return {uniform(rng, -amp, amp), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, 0.0, 6.283)};
}

}  // namespace

GridSpec sweep_grid(int n) {
  return GridSpec{-10.0, 10.0, n, -10.0, 10.0, n, Boundary::truncated};
}

HybridState random_smooth_state(const GridSpec& g, std::mt19937_64& rng) {
  const double half_q = 0.5 * (g.q_max - g.q_min);
  const double half_x = 0.5 * (g.x_max - g.x_min);
  const double cq = 0.5 * (g.q_max + g.q_min);
  const double cx = 0.5 * (g.x_max + g.x_min);
  const double sq = uniform(rng, 0.08, 0.11) * half_q;
  const double sx = uniform(rng, 0.08, 0.11) * half_x;
  const double rho = uniform(rng, -0.7, 0.7);
  const double mq = cq + uniform(rng, -0.1, 0.1) * half_q;
  const double mx = cx + uniform(rng, -0.1, 0.1) * half_x;
  const Wave wl1 = random_wave(rng, 0.15), wl2 = random_wave(rng, 0.15);
  const double gq = uniform(rng, -1.0, 1.0), gx = uniform(rng, -1.0, 1.0);
  const double kqq = uniform(rng, -0.5, 0.5), kqx = uniform(rng, -0.5, 0.5), kxx = uniform(rng, -0.5, 0.5);
  const Wave ws1 = random_wave(rng, 0.3), ws2 = random_wave(rng, 0.3);
  const double det = 1.0 - rho * rho;

  Field P = tabulate(g, [&](double q, double x) {
    const double u = (q - mq) / sq, v = (x - mx) / sx;
    return std::exp(-0.5 * (u * u - 2.0 * rho * u * v + v * v) / det + wl1(q, x) + wl2(q, x));
  });
  Field S = tabulate(g, [&](double q, double x) {
    const double u = q - mq, v = x - mx;
    return gq * u + gx * v + 0.5 * (kqq * u * u + 2.0 * kqx * u * v + kxx * v * v) + ws1(q, x) + ws2(q, x);
  });
  return HybridState::make(g, std::move(P), std::move(S));
}

HybridState random_product_state(const GridSpec& g, std::mt19937_64& rng) {
  const double half_q = 0.5 * (g.q_max - g.q_min);
  const double half_x = 0.5 * (g.x_max - g.x_min);
  const double sq = uniform(rng, 0.08, 0.11) * half_q;
  const double sx = uniform(rng, 0.08, 0.11) * half_x;
  const double mq = 0.5 * (g.q_max + g.q_min) + uniform(rng, -0.1, 0.1) * half_q;
  const double mx = 0.5 * (g.x_max + g.x_min) + uniform(rng, -0.1, 0.1) * half_x;
  const double aq = uniform(rng, -0.15, 0.15), ax = uniform(rng, -0.15, 0.15);
  const double kq = uniform(rng, 0.5, 1.5), kx = uniform(rng, 0.5, 1.5);
  const double gq = uniform(rng, -1.0, 1.0), gx = uniform(rng, -1.0, 1.0);
  const double hq = uniform(rng, -0.5, 0.5), hx = uniform(rng, -0.5, 0.5);
  std::vector<double> fq(g.n_q), fx(g.n_x), sq_(g.n_q), sx_(g.n_x);
  for (int i = 0; i < g.n_q; ++i) {
    const double u = g.q(i) - mq;
    fq[i] = std::exp(-0.5 * u * u / (sq * sq) + aq * std::sin(kq * g.q(i)));
    sq_[i] = gq * u + 0.5 * hq * u * u;
  }
  for (int j = 0; j < g.n_x; ++j) {
    const double v = g.x(j) - mx;
    fx[j] = std::exp(-0.5 * v * v / (sx * sx) + ax * std::sin(kx * g.x(j)));
    sx_[j] = gx * v + 0.5 * hx * v * v;
  }
  Field P(g), S(g);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) {
      P(i, j) = fq[i] * fx[j];
      S(i, j) = sq_[i] + sx_[j];
    }
  return HybridState::make(g, std::move(P), std::move(S));
}

}  // namespace hybrid
