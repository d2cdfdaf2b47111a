#include "hybrid/experiments.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <random>

namespace hybrid {

namespace {

// Standard normal quantiles for a two-sided 0.05 test and power 0.95.
constexpr double kZ975 = 1.959963984540054;
constexpr double kZ95 = 1.6448536269514722;
constexpr double kAbsoluteFloorRel = 1e-14;
constexpr double kNonQuadraticFloorRel = 1e-10;

RunRecord join(const RunRecord& pre, const RunRecord& post) {
  RunRecord r = post;
  r.samples = pre.samples;
  r.samples.insert(r.samples.end(), post.samples.begin() + 1, post.samples.end());
  r.diagnostics.steps += pre.diagnostics.steps;
  r.diagnostics.max_drift_per_step = std::max(pre.diagnostics.max_drift_per_step, post.diagnostics.max_drift_per_step);
  r.diagnostics.max_renormalization =
      std::max(pre.diagnostics.max_renormalization, post.diagnostics.max_renormalization);
  r.diagnostics.initial_rescale = pre.diagnostics.initial_rescale;
  return r;
}

bool same_sample(const Sample& a, const Sample& b) {
  for (const auto& c : record_columns()) {
    const double u = column(a, c), v = column(b, c);
    if (!(u == v || (std::isnan(u) && std::isnan(v)))) return false;
  }
  return a.probes == b.probes;
}

double max_x2(const RunRecord& r) {
  double m = 0.0;
  for (const auto& s : r.samples) m = std::max(m, std::abs(s.x2()));
  return m;
}

double max_x2_deviation(const RunRecord& a, const RunRecord& b) {
  if (a.samples.size() != b.samples.size())
    throw Error(ErrorCode::StepFailure, "solver records have different sample counts");
  double m = 0.0;
  for (std::size_t k = 0; k < a.samples.size(); ++k)
    m = std::max(m, std::abs(a.samples[k].x2() - b.samples[k].x2()));
  return m;
}

struct BranchPair {
  RunRecord A, B;
  std::optional<HybridState> final_A, final_B;
};

BranchPair run_grid(const Protocol& p, const HamiltonianParams& params_B) {
  const HybridState start = p.initial_state ? *p.initial_state : moments_to_state(p.initial, p.grid, p.params.hbar);
  const double t_off = p.t_off();
  const Evolution pre = evolve(start, p.params, p.integrator, 0.0, t_off, p.sample_dt, p.probes);
  auto fut_B = std::async(std::launch::async, [&] {
    return evolve(pre.final_state, params_B, p.integrator, t_off, p.t_end, p.sample_dt, p.probes);
  });
  const Evolution post_A = evolve(pre.final_state, p.params, p.integrator, t_off, p.t_end, p.sample_dt, p.probes);
  const Evolution post_B = fut_B.get();
  return {join(pre.record, post_A.record), join(pre.record, post_B.record), post_A.final_state, post_B.final_state};
}

BranchPair run_moments(const Protocol& p, const HamiltonianParams& params_B, double dt, bool realize) {
  const double t_off = p.t_off();
  const MomentEvolution pre =
      evolve_moments_record(p.initial, p.params, 0.0, t_off, p.sample_dt, dt, p.grid, p.probes);
  auto fut_B = std::async(std::launch::async, [&] {
    return evolve_moments_record(pre.final_moments, params_B, t_off, p.t_end, p.sample_dt, dt, p.grid, p.probes);
  });
  const MomentEvolution post_A =
      evolve_moments_record(pre.final_moments, p.params, t_off, p.t_end, p.sample_dt, dt, p.grid, p.probes);
  const MomentEvolution post_B = fut_B.get();
  BranchPair out{join(pre.record, post_A.record), join(pre.record, post_B.record), std::nullopt, std::nullopt};
  if (realize) {
    out.final_A = moments_to_state(post_A.final_moments, p.grid, p.params.hbar);
    out.final_B = moments_to_state(post_B.final_moments, p.grid, p.params.hbar);
  }
  return out;
}

}  // namespace

HamiltonianParams apply_branch(const HamiltonianParams& params, const Branch& branch) {
  HamiltonianParams out = params;
  switch (branch.kind) {
    case Branch::Kind::none:
      break;
    case Branch::Kind::scale_mq:
      if (!(branch.factor > 0.0) || !std::isfinite(branch.factor))
        throw Error(ErrorCode::RangeError, "branch factor must be positive");
      out.m_q *= branch.factor;
      break;
    case Branch::Kind::replace_Vq:
      out.potential.V_q = AxisPotential{branch.V_q, std::nullopt};
      break;
  }
  return out;
}

std::string to_string(const Branch& b) {
  switch (b.kind) {
    case Branch::Kind::none:
      return "none";
    case Branch::Kind::scale_mq:
      return "scale_mq(" + format_number(b.factor) + ")";
    case Branch::Kind::replace_Vq:
      return "replace_Vq(" + format_number(b.V_q.a0) + "," + format_number(b.V_q.a1) + "," +
             format_number(b.V_q.a2) + ")";
  }
  return "";
}

std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::grid:
      return "grid";
    case SolverKind::moments:
      return "moments";
    case SolverKind::both:
      return "both";
  }
  return "";
}

double Protocol::t_off() const { return params.schedule.empty() ? 0.0 : params.schedule.front().t_end; }

void Protocol::validate() const {
  grid.validate();
  params.validate();
  if (params.schedule.size() != 1) throw Error(ErrorCode::RangeError, "protocol needs exactly one interaction window");
  if (params.schedule.front().t_start < 0.0) throw Error(ErrorCode::RangeError, "the window must start at t >= 0");
  if (!(t_off() > 0.0)) throw Error(ErrorCode::RangeError, "t_off must be positive");
  if (!(t_end > t_off())) throw Error(ErrorCode::RangeError, "t_end must exceed t_off");
  if (!(sample_dt > 0.0)) throw Error(ErrorCode::RangeError, "sample_dt must be positive");
  if (!(moments_dt > 0.0)) throw Error(ErrorCode::RangeError, "moments_dt must be positive");
  if (initial_state && initial_state->grid() != grid)
    throw Error(ErrorCode::RangeError, "initial state grid differs from the protocol grid");
  if (initial_state && solver != SolverKind::grid)
    throw Error(ErrorCode::RangeError, "a checkpointed initial state needs the grid solver");
}

Protocol default_protocol() {
  Protocol p;
  p.grid = GridSpec{-10.0, 10.0, 256, -9.0, 11.0, 256, Boundary::truncated};
  p.params.potential.V_q.poly = Quadratic{0.0, 0.0, 0.5};
  p.params.schedule = {InteractionWindow{0.0, 1.0, 1.0}};
  p.initial.mean << 0.0, 1.0;
  p.initial.Sigma << 0.5, 0.0, 0.0, 0.5;
  p.branch = Branch{Branch::Kind::scale_mq, 2.0, {}};
  return p;
}

SignalReport run_signaling(const Protocol& p) {
  p.validate();
  if (p.branch.kind == Branch::Kind::none && p.detect)
    throw Error(ErrorCode::BranchInvalid, "detection requested but branch B is identical to branch A");
  const HamiltonianParams params_B = apply_branch(p.params, p.branch);
  const bool quadratic = !p.initial_state && p.params.potential.is_quadratic() && params_B.potential.is_quadratic();

  SignalReport r;
  r.t_off = p.t_off();
  r.t_end = p.t_end;
  r.branch_label = to_string(p.branch);
  r.solver_label = to_string(p.solver);
  const double scale_ref = [&] {
    if (p.solver == SolverKind::moments) {
      BranchPair m = run_moments(p, params_B, p.moments_dt, true);
      // Noise floor: the same control branch with half the moment step.
      const BranchPair fine = run_moments(p, params_B, 0.5 * p.moments_dt, false);
      r.noise_floor = max_x2_deviation(m.A, fine.A);
      r.series_A = std::move(m.A);
      r.series_B = std::move(m.B);
      r.final_A = std::move(m.final_A);
      r.final_B = std::move(m.final_B);
      return max_x2(r.series_A);
    }
    BranchPair g = run_grid(p, params_B);
    r.series_A = std::move(g.A);
    r.series_B = std::move(g.B);
    r.final_A = std::move(g.final_A);
    r.final_B = std::move(g.final_B);
    if (quadratic) {
      BranchPair m = run_moments(p, params_B, p.moments_dt, false);
      r.noise_floor = max_x2_deviation(r.series_A, m.A);
      if (p.solver == SolverKind::both) {
        r.moments_A = std::move(m.A);
        r.moments_B = std::move(m.B);
      }
    } else {
      r.noise_floor = kNonQuadraticFloorRel * max_x2(r.series_A);
    }
    return max_x2(r.series_A);
  }();
  r.noise_floor = std::max(r.noise_floor, kAbsoluteFloorRel * std::max(1.0, scale_ref));
  r.threshold = 10.0 * r.noise_floor;

  const double tol = 1e-12 * std::max(1.0, p.t_end);
  r.pre_branch_identical = r.series_A.samples.size() == r.series_B.samples.size();
  for (std::size_t k = 0; k < r.series_A.samples.size() && k < r.series_B.samples.size(); ++k) {
    const Sample& a = r.series_A.samples[k];
    const Sample& b = r.series_B.samples[k];
    r.divergence.push_back({a.t, a.x2() - b.x2()});
    r.max_divergence = std::max(r.max_divergence, std::abs(a.x2() - b.x2()));
    if (a.t <= r.t_off + tol && !same_sample(a, b)) r.pre_branch_identical = false;
  }
  r.detected = r.max_divergence > r.threshold;
  return r;
}

OnsetFit onset_analysis(const SignalReport& r) {
  const double tol = 1e-12 * std::max(1.0, r.t_end);
  std::vector<DivergencePoint> post;
  for (const auto& d : r.divergence)
    if (d.t > r.t_off + tol) post.push_back(d);
  if (post.size() < 20)
    throw Error(ErrorCode::RangeError, "onset analysis needs at least 20 post-branch samples, got " +
                                           std::to_string(post.size()));
  std::size_t first = post.size();
  for (std::size_t k = 0; k < post.size(); ++k)
    if (std::abs(post[k].delta) > r.threshold) {
      first = k;
      break;
    }
  if (first == post.size()) throw Error(ErrorCode::InsufficientSignal, "no post-branch sample clears the noise floor");

  const double tau0 = post[first].t - r.t_off;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = first; k < post.size(); ++k) {
    const double tau = post[k].t - r.t_off;
    if (tau > 10.0 * tau0 * (1.0 + 1e-9)) break;
    if (std::abs(post[k].delta) > r.threshold) pts.emplace_back(std::log(tau), std::log(std::abs(post[k].delta)));
  }
  // A late first crossing leaves a short decade; extend to the next points.
  for (std::size_t k = first + pts.size(); pts.size() < 3 && k < post.size(); ++k)
    if (std::abs(post[k].delta) > r.threshold)
      pts.emplace_back(std::log(post[k].t - r.t_off), std::log(std::abs(post[k].delta)));
  if (pts.size() < 2) throw Error(ErrorCode::InsufficientSignal, "fewer than two samples clear the noise floor");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  OnsetFit f;
  f.power = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.coefficient = std::exp((sy - f.power * sx) / n);
  f.tau_min = std::exp(pts.front().first);
  f.tau_max = std::exp(pts.back().first);
  f.points = static_cast<int>(pts.size());
  return f;
}

HalfEnsembleStats half_ensemble_detection(const SignalReport& r, int n_samples, std::uint64_t seed) {
  if (n_samples < 10) throw Error(ErrorCode::RangeError, "half-ensemble detection needs n_samples >= 10");
  if (!r.final_A || !r.final_B) throw Error(ErrorCode::RangeError, "report carries no final states");
  std::mt19937_64 rng(seed);
  HalfEnsembleStats h;
  h.n_samples = n_samples;

  struct Branch {
    double exact_mean, exact_var, sample_mean, sample_var;
  };
  const auto analyse = [&](const HybridState& s) {
    const GridSpec& g = s.grid();
    const Marginals m = marginals(s);
    std::vector<double> w2(g.n_x), w4(g.n_x);
    for (int j = 0; j < g.n_x; ++j) {
      const double x2 = g.x(j) * g.x(j);
      w2[j] = m.P_x[j] * x2 * g.dx();
      w4[j] = m.P_x[j] * x2 * x2 * g.dx();
    }
    Branch b{};
    b.exact_mean = compensated_sum(w2);
    b.exact_var = compensated_sum(w4) - b.exact_mean * b.exact_mean;
    std::discrete_distribution<int> cell(m.P_x.begin(), m.P_x.end());
    std::uniform_real_distribution<double> offset(-0.5, 0.5);
    std::vector<double> draws(n_samples);
    for (auto& v : draws) {
      const double x = g.x(cell(rng)) + offset(rng) * g.dx();
      v = x * x;
    }
    b.sample_mean = compensated_sum(draws) / n_samples;
    for (auto& v : draws) v = (v - b.sample_mean) * (v - b.sample_mean);
    b.sample_var = compensated_sum(draws) / (n_samples - 1);
    return b;
  };
  const Branch a = analyse(*r.final_A);
  const Branch b = analyse(*r.final_B);
  h.mean_A = a.sample_mean;
  h.mean_B = b.sample_mean;
  const double se = std::sqrt((a.sample_var + b.sample_var) / n_samples);
  h.z = se > 0.0 ? (a.sample_mean - b.sample_mean) / se : 0.0;
  h.delta = a.exact_mean - b.exact_mean;
  h.var_A = a.exact_var;
  h.var_B = b.exact_var;
  const double zz = (kZ975 + kZ95) * (kZ975 + kZ95);
  h.required_n = h.delta != 0.0 ? zz * (h.var_A + h.var_B) / (h.delta * h.delta)
                                : std::numeric_limits<double>::infinity();
  return h;
}

void write_report(const std::filesystem::path& dir, const SignalReport& r, const std::optional<OnsetFit>& onset,
                  const std::optional<HalfEnsembleStats>& half) {
  std::filesystem::create_directories(dir);
  save_csv(dir / "series_A.csv", r.series_A);
  save_csv(dir / "series_B.csv", r.series_B);
  if (r.moments_A) save_csv(dir / "moments_A.csv", *r.moments_A);
  if (r.moments_B) save_csv(dir / "moments_B.csv", *r.moments_B);
  std::ofstream os(dir / "summary.txt");
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + (dir / "summary.txt").string());
  const auto kv = [&](const std::string& k, const std::string& v) { os << k << ": " << v << '\n'; };
  kv("branch", r.branch_label);
  kv("solver", r.solver_label);
  kv("t_off", format_number(r.t_off));
  kv("t_end", format_number(r.t_end));
  kv("max_divergence", format_number(r.max_divergence));
  kv("noise_floor", format_number(r.noise_floor));
  kv("threshold", format_number(r.threshold));
  kv("detected", r.detected ? "true" : "false");
  kv("pre_branch_identical", r.pre_branch_identical ? "true" : "false");
  if (onset) {
    kv("onset_power", format_number(onset->power));
    kv("onset_coefficient", format_number(onset->coefficient));
    kv("onset_points", std::to_string(onset->points));
  } else {
    kv("onset_power", "none");
  }
  if (half) {
    kv("half_ensemble_samples", std::to_string(half->n_samples));
    kv("half_ensemble_z", format_number(half->z));
    kv("half_ensemble_delta", format_number(half->delta));
    kv("half_ensemble_required_n", format_number(half->required_n));
  }
  kv("initial_conditions", "self-chosen");
}

}  // namespace hybrid
