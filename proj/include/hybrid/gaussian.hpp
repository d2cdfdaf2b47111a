#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/observables.hpp"
#include "hybrid/run_record.hpp"

namespace hybrid {

/// Gaussian density with quadratic action, in coordinates r = (q, x):
///   P(r) = N(r; mean, Sigma)
///   S(r) = S_grad . (r - mean) + (1/2) (r - mean)^T S_hess (r - mean)
/// S_grad is therefore the mean momentum and S_hess the momentum-position
/// correlation slope. The additive constant of S is not tracked.
struct GaussianMoments {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d Sigma = Eigen::Matrix2d::Identity();
  Eigen::Vector2d S_grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d S_hess = Eigen::Matrix2d::Zero();

  /// Positive-definite covariance and finite entries.
  bool valid() const;

  GaussianMoments& operator+=(const GaussianMoments& o);
  GaussianMoments operator*(double s) const;
  bool operator==(const GaussianMoments& o) const;
};

/// Realise the ansatz on the grid. Throws DomainTooSmall unless the grid
/// covers at least six standard deviations on each side of the mean.
HybridState moments_to_state(const GaussianMoments& m, const GridSpec& g, double hbar);

/// Moments of a state: mean and covariance by quadrature, the phase
/// parameters as P-weighted averages of the stencil gradient and Hessian of S.
GaussianMoments state_to_moments(const HybridState& s);

/// Closed right-hand side of the ansatz under a quadratic Hamiltonian. With
/// M = diag(1/m_q, 1/m_x), Lambda = Sigma^-1, V = v.r + (1/2) r^T W r and
/// E the projector onto q:
///   d mean/dt  = M g
///   d Sigma/dt = M K Sigma + Sigma K M
///   d g/dt     = -(v + W mean)
///   d K/dt     = -K M K - W + (hbar^2 / 4 m_q) Lambda E Lambda
class MomentFlow {
 public:
  /// Throws NonQuadratic for tabulated potentials or coupling profiles.
  explicit MomentFlow(HamiltonianParams params);

  GaussianMoments operator()(const GaussianMoments& m, double lambda) const;
  const HamiltonianParams& params() const { return params_; }

 private:
  HamiltonianParams params_;
};

MomentFlow derive_moment_flow(const HamiltonianParams& params);

/// n RK4 steps of size dt from t0; returns n + 1 moment sets. The coupling is
/// frozen at its value at the start of each step. A step that leaves Sigma
/// indefinite is retried as two half steps; StepFailure after 20 halvings.
std::vector<GaussianMoments> evolve_moments(const GaussianMoments& m, const HamiltonianParams& params, double dt,
                                            long n, double t0 = 0.0);

/// Closed-form sample of the fixed columns. separability_defect,
/// signal_integral and probes are measured on the realised grid state.
Sample moments_sample(const GaussianMoments& m, const HamiltonianParams& params, double t, const GridSpec& g,
                      const std::vector<Observable>& probes);

struct MomentEvolution {
  RunRecord record;
  GaussianMoments final_moments;
};

/// Moment trajectory over [t0, t1] sampled like evolve(); steps of at most
/// dt are snapped onto samples and window edges. Record solver is "moments".
MomentEvolution evolve_moments_record(const GaussianMoments& m, const HamiltonianParams& params, double t0,
                                      double t1, double sample_dt, double dt, const GridSpec& g,
                                      const std::vector<Observable>& probes = {});

}  // namespace hybrid
