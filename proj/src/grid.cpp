#include "hybrid/grid.hpp"

#include <cmath>
#include <string>

namespace hybrid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::DerivativeUnavailable: return "DerivativeUnavailable";
    case ErrorCode::NegativeDensity: return "NegativeDensity";
    case ErrorCode::ContextViolation: return "ContextViolation";
    case ErrorCode::Instability: return "Instability";
    case ErrorCode::StabilityBound: return "StabilityBound";
    case ErrorCode::Caustic: return "Caustic";
    case ErrorCode::DomainTooSmall: return "DomainTooSmall";
    case ErrorCode::NonQuadratic: return "NonQuadratic";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::BranchInvalid: return "BranchInvalid";
    case ErrorCode::InsufficientSignal: return "InsufficientSignal";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void GridSpec::validate() const {
  if (!(std::isfinite(q_min) && std::isfinite(q_max) && q_max > q_min))
    throw Error(ErrorCode::RangeError, "grid: q_max must exceed q_min");
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min))
    throw Error(ErrorCode::RangeError, "grid: x_max must exceed x_min");
  if (n_q < 8) throw Error(ErrorCode::RangeError, "grid: n_q must be at least 8");
  if (n_x < 8) throw Error(ErrorCode::RangeError, "grid: n_x must be at least 8");
  if (!(dq() > 0.0 && dx() > 0.0))
    throw Error(ErrorCode::RangeError, "grid: cell sizes must be positive");
}

double compensated_sum(std::span<const double> v) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

double integrate(const Field& f, const GridSpec& g) {
  return compensated_sum(f.values()) * g.cell_area();
}

double integrate_product(const Field& a, const Field& b, const GridSpec& g) {
  std::vector<double> prod(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) prod[k] = a[k] * b[k];
  return compensated_sum(prod) * g.cell_area();
}

namespace {

void check_fields(const GridSpec& g, const Field& P, const Field& S) {
  g.validate();
  if (P.n_q() != g.n_q || P.n_x() != g.n_x || S.n_q() != g.n_q || S.n_x() != g.n_x)
    throw Error(ErrorCode::InvalidState, "field shape does not match grid");
  for (std::size_t k = 0; k < P.size(); ++k) {
    if (!std::isfinite(P[k]) || !std::isfinite(S[k]))
      throw Error(ErrorCode::InvalidState, "non-finite entry at cell " + std::to_string(k));
    if (P[k] < 0.0)
      throw Error(ErrorCode::InvalidState, "negative density at cell " + std::to_string(k));
  }
}

}  // namespace

HybridState HybridState::unnormalized(GridSpec grid, Field P, Field S) {
  check_fields(grid, P, S);
  return HybridState(grid, std::move(P), std::move(S));
}

HybridState HybridState::make(GridSpec grid, Field P, Field S) {
  return normalize(unnormalized(grid, std::move(P), std::move(S)));
}

HybridState normalize(const HybridState& state) {
  const double m = state.mass();
  if (!(m > 0.0) || !std::isfinite(m))
    throw Error(ErrorCode::ZeroMass, "total probability is zero or non-finite");
  HybridState out = state;
  if (m != 1.0) {
    const double f = 1.0 / m;
    for (double& p : out.P_.values()) p *= f;
    out.rescale_ = f;
  } else {
    out.rescale_ = 1.0;
  }
  return out;
}

Marginals marginals(const HybridState& state) {
  const auto& g = state.grid();
  const auto& P = state.P();
  Marginals m{std::vector<double>(g.n_q), std::vector<double>(g.n_x)};
  std::vector<double> col(g.n_q);
  for (int i = 0; i < g.n_q; ++i)
    m.P_q[i] = compensated_sum({P.row(i), static_cast<std::size_t>(g.n_x)}) * g.dx();
  for (int j = 0; j < g.n_x; ++j) {
    for (int i = 0; i < g.n_q; ++i) col[i] = P(i, j);
    m.P_x[j] = compensated_sum(col) * g.dq();
  }
  return m;
}

double separability_defect(const HybridState& state) {
  const auto& g = state.grid();
  const auto m = marginals(state);
  Field d(g);
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j) d(i, j) = std::abs(state.P()(i, j) - m.P_q[i] * m.P_x[j]);
  return integrate(d, g);
}

}  // namespace hybrid
