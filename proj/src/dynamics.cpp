#include "hybrid/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace hybrid {

double stability_bound(const GridSpec& g, const HamiltonianParams& params, double c_stab) {
  const double h = std::min(g.dq(), g.dx());
  return c_stab * h * h * std::min(params.m_q, params.m_x) / params.hbar;
}

double resolve_dt(const IntegratorSpec& spec, const GridSpec& g, const HamiltonianParams& params) {
  const double bound = stability_bound(g, params, spec.c_stab);
  if (spec.dt == 0.0) return bound;
  if (!std::isfinite(spec.dt) || std::abs(spec.dt) > bound * (1.0 + 1e-12))
    throw Error(ErrorCode::StabilityBound,
                "dt = " + std::to_string(spec.dt) + " exceeds the bound " + std::to_string(bound));
  return spec.dt;
}

LogFields to_log_fields(const HybridState& s, const Regularization& reg) {
  return {log_density(s, reg), s.S()};
}

HybridState to_state(const LogFields& y, const GridSpec& g, double* mass) {
  Field P(g);
  for (std::size_t k = 0; k < P.size(); ++k) P[k] = std::exp(y.L[k]);
  HybridState raw = HybridState::unnormalized(g, std::move(P), y.S);
  if (mass) *mass = raw.mass();
  return normalize(raw);
}

GridSolver::GridSolver(GridSpec g, HamiltonianParams params)
    : grid_(g),
      params_(std::move(params)),
      q1_(make_stencil(g, Axis::q, DerivativeOrder::first)),
      q2_(make_stencil(g, Axis::q, DerivativeOrder::second)),
      x1_(make_stencil(g, Axis::x, DerivativeOrder::first)),
      x2_(make_stencil(g, Axis::x, DerivativeOrder::second)),
      k_{Field(g), Field(g)},
      tmp_{Field(g), Field(g)},
      acc_{Field(g), Field(g)},
      lq_(g.n_x),
      sq_(g.n_x),
      lqq_(g.n_x),
      sqq_(g.n_x) {
  grid_.validate();
  params_.validate();
  params_.potential.validate(grid_);
  v_base_ = quantum_potential_field(grid_, params_);
  const Field vx = classical_potential_field(grid_, params_);
  for (std::size_t k = 0; k < v_base_.size(); ++k) v_base_[k] += vx[k];
  coupling_ = coupling_field(grid_, params_);
}

void GridSolver::rhs(const LogFields& y, double lambda, LogFields& dy) {
  const int nq = grid_.n_q;
  const int nx = grid_.n_x;
  const double iq = 1.0 / params_.m_q;
  const double ix = 1.0 / params_.m_x;
  const double cq = params_.hbar * params_.hbar / (8.0 * params_.m_q);
  const double hx = grid_.dx();
  const double c1 = 1.0 / (12.0 * hx);
  const double c2 = 1.0 / (12.0 * hx * hx);

  for (int i = 0; i < nq; ++i) {
    std::fill(lq_.begin(), lq_.end(), 0.0);
    std::fill(sq_.begin(), sq_.end(), 0.0);
    std::fill(lqq_.begin(), lqq_.end(), 0.0);
    std::fill(sqq_.begin(), sqq_.end(), 0.0);
    const StencilRow& r1 = q1_.row(i);
    for (int k = 0; k < r1.len; ++k) {
      const double c = r1.c[k];
      const double* L = y.L.row(r1.idx[k]);
      const double* S = y.S.row(r1.idx[k]);
      for (int j = 0; j < nx; ++j) {
        lq_[j] += c * L[j];
        sq_[j] += c * S[j];
      }
    }
    const StencilRow& r2 = q2_.row(i);
    for (int k = 0; k < r2.len; ++k) {
      const double c = r2.c[k];
      const double* L = y.L.row(r2.idx[k]);
      const double* S = y.S.row(r2.idx[k]);
      for (int j = 0; j < nx; ++j) {
        lqq_[j] += c * L[j];
        sqq_[j] += c * S[j];
      }
    }

    const double* L = y.L.row(i);
    const double* S = y.S.row(i);
    const double* V = v_base_.row(i);
    const double* U = coupling_.row(i);
    double* dL = dy.L.row(i);
    double* dS = dy.S.row(i);
    const auto combine = [&](int j, double Lx, double Sx, double Sxx) {
      const double Lq = lq_[j], Sq = sq_[j];
      dL[j] = -(sqq_[j] + Lq * Sq) * iq - (Sxx + Lx * Sx) * ix;
      dS[j] = -0.5 * Sq * Sq * iq - 0.5 * Sx * Sx * ix - (V[j] + lambda * U[j]) +
              cq * (2.0 * lqq_[j] + Lq * Lq);
    };
    const auto edge = [&](int j) {
      combine(j, x1_.apply_at(L, 1, j), x1_.apply_at(S, 1, j), x2_.apply_at(S, 1, j));
    };
    edge(0);
    edge(1);
    for (int j = 2; j < nx - 2; ++j) {
      const double Lx = (L[j - 2] - 8.0 * L[j - 1] + 8.0 * L[j + 1] - L[j + 2]) * c1;
      const double Sx = (S[j - 2] - 8.0 * S[j - 1] + 8.0 * S[j + 1] - S[j + 2]) * c1;
      const double Sxx = (-S[j - 2] + 16.0 * S[j - 1] - 30.0 * S[j] + 16.0 * S[j + 1] - S[j + 2]) * c2;
      combine(j, Lx, Sx, Sxx);
    }
    edge(nx - 2);
    edge(nx - 1);
  }
}

void GridSolver::rk4_step(LogFields& y, double t, double dt) {
  const double lambda = params_.lambda_at(t);
  const std::size_t n = y.L.size();
  const auto stage = [&](const LogFields& from, double acc_w, double next_w, bool last) {
    rhs(from, lambda, k_);
    for (std::size_t m = 0; m < n; ++m) {
      acc_.L[m] += acc_w * k_.L[m];
      acc_.S[m] += acc_w * k_.S[m];
      if (!last) {
        tmp_.L[m] = y.L[m] + next_w * k_.L[m];
        tmp_.S[m] = y.S[m] + next_w * k_.S[m];
      }
    }
  };
  acc_.L = y.L;
  acc_.S = y.S;
  stage(y, dt / 6.0, 0.5 * dt, false);
  stage(tmp_, dt / 3.0, 0.5 * dt, false);
  stage(tmp_, dt / 3.0, dt, false);
  stage(tmp_, dt / 6.0, 0.0, true);
  std::swap(y.L, acc_.L);
  std::swap(y.S, acc_.S);
}

void GridSolver::filter(LogFields& y, double dt, double gain) {
  const int nq = grid_.n_q;
  const int nx = grid_.n_x;
  if (nq < 7) return;
  const double hq = grid_.dq();
  const double hx = grid_.dx();
  const double a_q = params_.hbar / (2.0 * params_.m_q);
  const double a_x = params_.hbar / (4.0 * std::sqrt(params_.m_q * params_.m_x));
  const double scale = gain * std::abs(dt) / hq;
  // Sixth difference: its symbol is -64 sin^6(k h / 2), so mu = 1 removes the
  // Nyquist mode and smooth profiles are perturbed only at O(h^6) per step.
  static constexpr double w[7] = {1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0};
  for (int i = 0; i < nq; ++i) {
    const int c = std::clamp(i, 3, nq - 4);
    const int up = std::min(i + 1, nq - 1), dn = std::max(i - 1, 0);
    const double* L = y.L.row(i);
    const double* Lu = y.L.row(up);
    const double* Ld = y.L.row(dn);
    double* fL = tmp_.L.row(i);
    double* fS = tmp_.S.row(i);
    for (int j = 0; j < nx; ++j) {
      const int r = std::min(j + 1, nx - 1), l = std::max(j - 1, 0);
      const double Lq = (Lu[j] - Ld[j]) / ((up - dn) * hq);
      const double Lx = (L[r] - L[l]) / ((r - l) * hx);
      const double mu = std::min(1.0, scale * (a_q * std::abs(Lq) + a_x * std::abs(Lx))) / 64.0;
      double dL = 0.0, dS = 0.0;
      for (int k = 0; k < 7; ++k) {
        dL += w[k] * y.L(c - 3 + k, j);
        dS += w[k] * y.S(c - 3 + k, j);
      }
      fL[j] = L[j] + mu * dL;
      fS[j] = y.S(i, j) + mu * dS;
    }
  }
  std::swap(y.L, tmp_.L);
  std::swap(y.S, tmp_.S);
}

void GridSolver::relax_tails(LogFields& y, double depth) {
  constexpr double kBlend = 20.0;
  constexpr double kShell = 6.0;  // e-folds of fitting shell above the sponge
  const int nq = grid_.n_q;
  const int nx = grid_.n_x;
  double lmax = -std::numeric_limits<double>::infinity();
  for (double v : y.L.values()) lmax = std::max(lmax, v);
  double lmin = std::numeric_limits<double>::infinity();
  for (double v : y.L.values()) lmin = std::min(lmin, v);
  if (lmax - lmin <= depth) return;

  Field sq(grid_), sx(grid_);
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nx; ++j) {
      sq(i, j) = q1_.apply_at(y.S.row(0) + j, nx, i);
      sx(i, j) = x1_.apply_at(y.S.row(i), 1, j);
    }

  // Moments of the density and P-weighted averages of grad S and the
  // Hessian of S.
  double w = 0.0;
  Eigen::Vector2d m1 = Eigen::Vector2d::Zero(), g = Eigen::Vector2d::Zero();
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero(), K = Eigen::Matrix2d::Zero();
  Field p(grid_);
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nx; ++j) {
      const double pij = std::exp(y.L(i, j) - lmax);
      p(i, j) = pij;
      const Eigen::Vector2d r(grid_.q(i), grid_.x(j));
      w += pij;
      m1 += pij * r;
      m2 += pij * r * r.transpose();
      g += pij * Eigen::Vector2d(sq(i, j), sx(i, j));
      const double sqq = q2_.apply_at(y.S.row(0) + j, nx, i);
      const double sxx = x2_.apply_at(y.S.row(i), 1, j);
      const double sqx = x1_.apply_at(sq.row(i), 1, j);
      K += pij * (Eigen::Matrix2d() << sqq, sqx, sqx, sxx).finished();
    }
  const Eigen::Vector2d mu = m1 / w;
  const Eigen::Matrix2d cov = m2 / w - mu * mu.transpose();
  g /= w;
  K /= w;
  if (!(cov.determinant() > 0.0) || !(cov(0, 0) > 0.0)) return;
  const Eigen::Matrix2d prec = cov.inverse();

  // Constant offsets by P-weighted least squares.
  double l0 = 0.0, s0 = 0.0;
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nx; ++j) {
      const Eigen::Vector2d d = Eigen::Vector2d(grid_.q(i), grid_.x(j)) - mu;
      l0 += p(i, j) * (y.L(i, j) + 0.5 * d.dot(prec * d));
      s0 += p(i, j) * (y.S(i, j) - g.dot(d) - 0.5 * d.dot(K * d));
    }
  l0 /= w;
  s0 /= w;

  // Coefficients on (1, dq, dx, dq^2, dq dx, dx^2) with d = r - mu.
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  Vec6 cl, cs;
  cl << l0, 0.0, 0.0, -0.5 * prec(0, 0), -prec(0, 1), -0.5 * prec(1, 1);
  cs << s0, g(0), g(1), 0.5 * K(0, 0), K(0, 1), 0.5 * K(1, 1);

  // Preferred target: quadratics fitted to the shell just above the sponge,
  // so that a non-Gaussian state is continued by its own tail rather than by
  // the Gaussian of its core moments.
  const auto basis = [&](int i, int j) {
    const double a = grid_.q(i) - mu(0), b = grid_.x(j) - mu(1);
    return (Vec6() << 1.0, a, b, a * a, a * b, b * b).finished();
  };
  const double shell_top = std::max(0.0, depth - kShell);
  Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
  Vec6 bl = Vec6::Zero(), bs = Vec6::Zero();
  int shell = 0;
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nx; ++j) {
      const double dd = lmax - y.L(i, j);
      if (dd < shell_top || dd > depth) continue;
      const Vec6 phi = basis(i, j);
      A.selfadjointView<Eigen::Lower>().rankUpdate(phi);
      bl += y.L(i, j) * phi;
      bs += y.S(i, j) * phi;
      ++shell;
    }
  if (shell >= 4 * 6) {
    const Eigen::Matrix<double, 6, 6> full = A.selfadjointView<Eigen::Lower>();
    const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(full);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Vec6 fl = ldlt.solve(bl), fs = ldlt.solve(bs);
      const Eigen::Matrix2d hl = (Eigen::Matrix2d() << 2.0 * fl(3), fl(4), fl(4), 2.0 * fl(5)).finished();
      // Only a tail that decays in every direction is a usable target.
      if (fl.allFinite() && fs.allFinite() && (-hl).determinant() > 0.0 && hl(0, 0) < 0.0) {
        cl = fl;
        cs = fs;
      }
    }
  }

  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nx; ++j) {
      const double below = lmax - y.L(i, j) - depth;
      if (below <= 0.0) continue;
      const double u = std::min(1.0, below / kBlend);
      const double keep = 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
      const Vec6 phi = basis(i, j);
      const double lf = cl.dot(phi);
      const double sf = cs.dot(phi);
      y.L(i, j) = lf + keep * (y.L(i, j) - lf);
      y.S(i, j) = sf + keep * (y.S(i, j) - sf);
    }
}

double GridSolver::resolution_metric(const LogFields& y) const {
  double lmax = -std::numeric_limits<double>::infinity();
  for (double v : y.L.values()) lmax = std::max(lmax, v);
  const double cut = lmax + std::log(params_.regularization.mask_rel);
  const double hq2 = grid_.dq() * grid_.dq();
  const double hx2 = grid_.dx() * grid_.dx();
  double worst = 0.0;
  for (int i = 0; i < grid_.n_q; ++i)
    for (int j = 0; j < grid_.n_x; ++j) {
      if (y.L(i, j) < cut) continue;
      const double lqq = q2_.apply_at(y.L.row(0) + j, grid_.n_x, i);
      const double lxx = x2_.apply_at(y.L.row(i), 1, j);
      worst = std::max({worst, std::abs(lqq) * hq2, std::abs(lxx) * hx2});
    }
  return worst;
}

namespace {

void require_finite(const LogFields& y, double t) {
  for (std::size_t k = 0; k < y.L.size(); ++k)
    if (!std::isfinite(y.L[k]) || !std::isfinite(y.S[k]))
      throw Error(ErrorCode::Instability, "non-finite field at t = " + std::to_string(t));
}

double log_mass(const LogFields& y, const GridSpec& g) {
  std::vector<double> p(y.L.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(y.L[k]);
  return compensated_sum(p) * g.cell_area();
}

}  // namespace

Timeline make_timeline(double t0, double t1, double sample_dt, const std::vector<InteractionWindow>& schedule) {
  if (!(t1 > t0)) throw Error(ErrorCode::RangeError, "t1 must exceed t0");
  if (!(sample_dt > 0.0)) throw Error(ErrorCode::RangeError, "sample_dt must be positive");
  const double tol = 1e-12 * std::max(1.0, std::abs(t1));
  std::vector<std::pair<double, bool>> all;
  for (long k = 0;; ++k) {
    const double t = t0 + k * sample_dt;
    if (t > t1 - tol) break;
    all.emplace_back(t, true);
  }
  all.emplace_back(t1, true);
  for (const auto& w : schedule)
    for (double e : {w.t_start, w.t_end})
      if (e > t0 + tol && e < t1 - tol) all.emplace_back(e, false);
  std::sort(all.begin(), all.end());
  // A sample lying within round-off of a window edge is moved onto the edge,
  // so the coupling is evaluated on the correct side of the switch.
  Timeline out;
  for (const auto& [t, is_sample] : all) {
    if (!out.events.empty() && std::abs(t - out.events.back()) <= tol) {
      if (is_sample) out.sample.back() = true;
      else if (out.events.size() > 1 && out.events.back() != t1) out.events.back() = t;
      continue;
    }
    out.events.push_back(t);
    out.sample.push_back(is_sample);
  }
  return out;
}

HybridState step(const HybridState& s, const HamiltonianParams& params, const IntegratorSpec& spec, double t) {
  const double dt = resolve_dt(spec, s.grid(), params);
  GridSolver solver(s.grid(), params);
  LogFields y = to_log_fields(s, params.regularization);
  solver.rk4_step(y, t, dt);
  if (spec.stabilize) solver.filter(y, dt, spec.filter_gain);
  require_finite(y, t + dt);
  Field P(s.grid());
  for (std::size_t k = 0; k < P.size(); ++k) P[k] = std::exp(y.L[k]);
  return HybridState::unnormalized(s.grid(), std::move(P), std::move(y.S));
}

Evolution evolve(const HybridState& s, const HamiltonianParams& params, const IntegratorSpec& spec, double t0,
                 double t1, double sample_dt, const std::vector<Observable>& probes) {
  if (!(t1 > t0)) throw Error(ErrorCode::RangeError, "evolve: t1 must exceed t0");
  if (!(sample_dt > 0.0)) throw Error(ErrorCode::RangeError, "evolve: sample_dt must be positive");
  if (spec.renormalize_every < 1) throw Error(ErrorCode::RangeError, "renormalize_every must be positive");
  const GridSpec& g = s.grid();
  const double dt_max = std::abs(resolve_dt(spec, g, params));
  GridSolver solver(g, params);
  const Timeline line = make_timeline(t0, t1, sample_dt, params.schedule);
  const auto& events = line.events;

  Evolution out{RunRecord{}, s};
  out.record.solver = "grid";
  for (const auto& o : probes) out.record.probe_labels.push_back(o.label);
  auto& diag = out.record.diagnostics;

  HybridState start = normalize(s);
  diag.initial_rescale = start.rescale_factor();
  LogFields y = to_log_fields(start, params.regularization);
  out.record.samples.push_back(measure(start, params, t0, probes, 1.0));

  long since_renorm = 0;
  for (std::size_t e = 1; e < events.size(); ++e) {
    const double a = events[e - 1];
    const double b = events[e];
    const long n = std::max(1L, static_cast<long>(std::ceil((b - a) / dt_max - 1e-9)));
    const double h = (b - a) / n;
    for (long k = 0; k < n; ++k) {
      if (++diag.steps > spec.max_steps) throw Error(ErrorCode::RangeError, "evolve: max_steps exceeded");
      solver.rk4_step(y, a + k * h, h);
      if (spec.stabilize) solver.filter(y, h, spec.filter_gain);
      if (++since_renorm == spec.renormalize_every) {
        require_finite(y, a + (k + 1) * h);
        if (spec.stabilize) solver.relax_tails(y, spec.sponge_depth);
        const double m = log_mass(y, g);
        diag.max_drift_per_step = std::max(diag.max_drift_per_step, std::abs(m - 1.0) / since_renorm);
        diag.max_renormalization = std::max(diag.max_renormalization, std::abs(m - 1.0));
        const double shift = std::log(m);
        for (double& v : y.L.values()) v -= shift;
        since_renorm = 0;
      }
    }
    if (line.sample[e]) {
      require_finite(y, b);
      const double metric = solver.resolution_metric(y);
      if (metric > 1.0)
        throw Error(ErrorCode::Caustic, "density narrower than a grid cell at t = " + std::to_string(b) +
                                            " (metric " + std::to_string(metric) + ")");
      double mass = 0.0;
      const HybridState st = to_state(y, g, &mass);
      if (since_renorm > 0)
        diag.max_drift_per_step = std::max(diag.max_drift_per_step, std::abs(mass - 1.0) / since_renorm);
      out.record.samples.push_back(measure(st, params, b, probes, mass));
    }
  }
  out.final_state = to_state(y, g);
  return out;
}

}  // namespace hybrid
