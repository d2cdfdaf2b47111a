#include "hybrid/gaussian.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "hybrid/brackets.hpp"
#include "hybrid/dynamics.hpp"
#include "hybrid/stencil.hpp"

namespace hybrid {

namespace {

constexpr int kMaxHalvings = 20;

Eigen::Matrix2d inverse_mass(const HamiltonianParams& p) {
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  M(0, 0) = 1.0 / p.m_q;
  M(1, 1) = 1.0 / p.m_x;
  return M;
}

// V(r) = const + v.r + (1/2) r^T W r
Eigen::Matrix2d potential_hessian(const HamiltonianParams& p, double lambda) {
  Eigen::Matrix2d W;
  W << 2.0 * p.potential.V_q.poly.a2, lambda, lambda, 2.0 * p.potential.V_x.poly.a2;
  return W;
}

Eigen::Vector2d potential_gradient_at_origin(const HamiltonianParams& p) {
  return {p.potential.V_q.poly.a1, p.potential.V_x.poly.a1};
}

}  // namespace

bool GaussianMoments::valid() const {
  const bool finite = mean.allFinite() && Sigma.allFinite() && S_grad.allFinite() && S_hess.allFinite();
  return finite && Sigma(0, 0) > 0.0 && Sigma(1, 1) > 0.0 && Sigma.determinant() > 0.0;
}

GaussianMoments& GaussianMoments::operator+=(const GaussianMoments& o) {
  mean += o.mean;
  Sigma += o.Sigma;
  S_grad += o.S_grad;
  S_hess += o.S_hess;
  return *this;
}

GaussianMoments GaussianMoments::operator*(double s) const {
  GaussianMoments r;
  r.mean = mean * s;
  r.Sigma = Sigma * s;
  r.S_grad = S_grad * s;
  r.S_hess = S_hess * s;
  return r;
}

bool GaussianMoments::operator==(const GaussianMoments& o) const {
  return mean == o.mean && Sigma == o.Sigma && S_grad == o.S_grad && S_hess == o.S_hess;
}

HybridState moments_to_state(const GaussianMoments& m, const GridSpec& g, double hbar) {
  (void)hbar;  // S is stored in action units; hbar enters only through observables
  g.validate();
  if (!m.valid()) throw Error(ErrorCode::InvalidState, "Gaussian moments: Sigma must be positive-definite");
  const double sq = std::sqrt(m.Sigma(0, 0));
  const double sx = std::sqrt(m.Sigma(1, 1));
  if (m.mean(0) - 6.0 * sq < g.q_min || m.mean(0) + 6.0 * sq > g.q_max || m.mean(1) - 6.0 * sx < g.x_min ||
      m.mean(1) + 6.0 * sx > g.x_max)
    throw Error(ErrorCode::DomainTooSmall, "grid does not cover six standard deviations around the mean");
  const Eigen::Matrix2d Lambda = m.Sigma.inverse();
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(m.Sigma.determinant()));
  Field P(g), S(g);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) {
      const Eigen::Vector2d d(g.q(i) - m.mean(0), g.x(j) - m.mean(1));
      P(i, j) = norm * std::exp(-0.5 * d.dot(Lambda * d));
      S(i, j) = m.S_grad.dot(d) + 0.5 * d.dot(m.S_hess * d);
    }
  return HybridState::make(g, std::move(P), std::move(S));
}

GaussianMoments state_to_moments(const HybridState& s) {
  const GridSpec& g = s.grid();
  const Field& P = s.P();
  const Field Q = tabulate(g, [](double q, double) { return q; });
  const Field X = tabulate(g, [](double, double x) { return x; });
  GaussianMoments m;
  m.mean << integrate_product(P, Q, g), integrate_product(P, X, g);
  const Field dQ = tabulate(g, [&](double q, double) { return q - m.mean(0); });
  const Field dX = tabulate(g, [&](double, double x) { return x - m.mean(1); });
  Field w(g);
  const auto weighted = [&](const Field& a, const Field& b) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = P[k] * a[k];
    return integrate_product(w, b, g);
  };
  m.Sigma(0, 0) = weighted(dQ, dQ);
  m.Sigma(1, 1) = weighted(dX, dX);
  m.Sigma(0, 1) = m.Sigma(1, 0) = weighted(dQ, dX);

  const Field Sq = d1(s.S(), g, Axis::q);
  const Field Sx = d1(s.S(), g, Axis::x);
  m.S_grad << integrate_product(P, Sq, g), integrate_product(P, Sx, g);
  m.S_hess(0, 0) = integrate_product(P, d2(s.S(), g, Axis::q), g);
  m.S_hess(1, 1) = integrate_product(P, d2(s.S(), g, Axis::x), g);
  m.S_hess(0, 1) = m.S_hess(1, 0) = integrate_product(P, d1(Sq, g, Axis::x), g);
  return m;
}

MomentFlow::MomentFlow(HamiltonianParams params) : params_(std::move(params)) {
  params_.validate();
  if (!params_.potential.is_quadratic())
    throw Error(ErrorCode::NonQuadratic, "moment dynamics needs polynomial V_q, V_x and a q*x coupling");
}

GaussianMoments MomentFlow::operator()(const GaussianMoments& m, double lambda) const {
  const Eigen::Matrix2d M = inverse_mass(params_);
  const Eigen::Matrix2d W = potential_hessian(params_, lambda);
  const Eigen::Vector2d v = potential_gradient_at_origin(params_);
  const Eigen::Matrix2d Lambda = m.Sigma.inverse();
  const Eigen::Vector2d lq = Lambda.col(0);
  const Eigen::Matrix2d& K = m.S_hess;
  GaussianMoments d;
  d.mean = M * m.S_grad;
  d.Sigma = M * K * m.Sigma + m.Sigma * K * M;
  d.S_grad = -(v + W * m.mean);
  d.S_hess = -K * M * K - W + (params_.hbar * params_.hbar / (4.0 * params_.m_q)) * (lq * lq.transpose());
  return d;
}

MomentFlow derive_moment_flow(const HamiltonianParams& params) { return MomentFlow(params); }

namespace {

GaussianMoments rk4(const MomentFlow& f, const GaussianMoments& m, double lambda, double h) {
  const GaussianMoments k1 = f(m, lambda);
  GaussianMoments y = m;
  y += k1 * (0.5 * h);
  const GaussianMoments k2 = f(y, lambda);
  y = m;
  y += k2 * (0.5 * h);
  const GaussianMoments k3 = f(y, lambda);
  y = m;
  y += k3 * h;
  const GaussianMoments k4 = f(y, lambda);
  GaussianMoments out = m;
  out += k1 * (h / 6.0);
  out += k2 * (h / 3.0);
  out += k3 * (h / 3.0);
  out += k4 * (h / 6.0);
  // Keep the symmetric blocks exactly symmetric.
  out.Sigma(1, 0) = out.Sigma(0, 1);
  out.S_hess(1, 0) = out.S_hess(0, 1);
  return out;
}

GaussianMoments advance(const MomentFlow& f, const GaussianMoments& m, double t, double h, int depth) {
  GaussianMoments next = rk4(f, m, f.params().lambda_at(t), h);
  if (next.valid()) return next;
  if (depth >= kMaxHalvings)
    throw Error(ErrorCode::StepFailure, "covariance lost positivity after " + std::to_string(kMaxHalvings) +
                                            " step halvings at t = " + std::to_string(t));
  const GaussianMoments half = advance(f, m, t, 0.5 * h, depth + 1);
  return advance(f, half, t + 0.5 * h, 0.5 * h, depth + 1);
}

}  // namespace

std::vector<GaussianMoments> evolve_moments(const GaussianMoments& m, const HamiltonianParams& params, double dt,
                                            long n, double t0) {
  if (!m.valid()) throw Error(ErrorCode::InvalidState, "Gaussian moments: Sigma must be positive-definite");
  if (n < 0 || !(std::abs(dt) > 0.0)) throw Error(ErrorCode::RangeError, "evolve_moments: need dt != 0, n >= 0");
  const MomentFlow flow(params);
  std::vector<GaussianMoments> out{m};
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (long k = 0; k < n; ++k) out.push_back(advance(flow, out.back(), t0 + k * dt, dt, 0));
  return out;
}

Sample moments_sample(const GaussianMoments& m, const HamiltonianParams& params, double t, const GridSpec& g,
                      const std::vector<Observable>& probes) {
  const Eigen::Matrix2d M = inverse_mass(params);
  const Eigen::Matrix2d Lambda = m.Sigma.inverse();
  const Eigen::Matrix2d KSK = m.S_hess * m.Sigma * m.S_hess;
  const Eigen::Vector2d& mu = m.mean;
  const Eigen::Vector2d& gr = m.S_grad;
  const auto axis_mean = [](const AxisPotential& V, double mean, double var) {
    return V.poly.a0 + V.poly.a1 * mean + V.poly.a2 * (mean * mean + var);
  };
  const double lambda = params.lambda_at(t);
  const double hbar2 = params.hbar * params.hbar;

  Sample s;
  s.t = t;
  s.norm = 1.0;
  s.energy = 0.5 * (gr.dot(M * gr) + (M * KSK).trace()) + hbar2 / (8.0 * params.m_q) * Lambda(0, 0) +
             axis_mean(params.potential.V_q, mu(0), m.Sigma(0, 0)) +
             axis_mean(params.potential.V_x, mu(1), m.Sigma(1, 1)) + lambda * (mu(0) * mu(1) + m.Sigma(0, 1));
  s.x_mean = mu(1);
  s.x_var = m.Sigma(1, 1);
  s.px_mean = gr(1);
  s.px2 = gr(1) * gr(1) + KSK(1, 1);
  s.q_mean = mu(0);
  s.q_var = m.Sigma(0, 0);
  s.pq2 = gr(0) * gr(0) + KSK(0, 0) + 0.25 * hbar2 * Lambda(0, 0);

  const HybridState st = moments_to_state(m, g, params.hbar);
  s.separability_defect = separability_defect(st);
  s.signal_integral = signal_integral(st, params);
  const bool free = lambda == 0.0 && params.potential.V_x.is_flat();
  s.d2x2_formula = free ? 2.0 * s.px2 / (params.m_x * params.m_x) + s.signal_integral
                        : std::numeric_limits<double>::quiet_NaN();
  for (const auto& o : probes) s.probes.push_back(expectation(st, o, params));
  return s;
}

MomentEvolution evolve_moments_record(const GaussianMoments& m, const HamiltonianParams& params, double t0,
                                      double t1, double sample_dt, double dt, const GridSpec& g,
                                      const std::vector<Observable>& probes) {
  if (!(dt > 0.0)) throw Error(ErrorCode::RangeError, "moment step must be positive");
  if (!m.valid()) throw Error(ErrorCode::InvalidState, "Gaussian moments: Sigma must be positive-definite");
  const MomentFlow flow(params);
  const Timeline line = make_timeline(t0, t1, sample_dt, params.schedule);

  MomentEvolution out{RunRecord{}, m};
  out.record.solver = "moments";
  for (const auto& o : probes) out.record.probe_labels.push_back(o.label);
  out.record.samples.push_back(moments_sample(m, params, t0, g, probes));
  GaussianMoments y = m;
  for (std::size_t e = 1; e < line.events.size(); ++e) {
    const double a = line.events[e - 1];
    const double b = line.events[e];
    const long n = std::max(1L, static_cast<long>(std::ceil((b - a) / dt - 1e-9)));
    const double h = (b - a) / n;
    for (long k = 0; k < n; ++k) y = advance(flow, y, a + k * h, h, 0);
    out.record.diagnostics.steps += n;
    if (line.sample[e]) out.record.samples.push_back(moments_sample(y, params, b, g, probes));
  }
  out.final_moments = y;
  return out;
}

}  // namespace hybrid
