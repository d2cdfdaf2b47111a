#pragma once

#include <cmath>
#include <numbers>

#include "hybrid/gaussian.hpp"
#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"

namespace hybrid::testing {

inline GridSpec square_grid(int n, double lo = -8.0, double hi = 8.0) {
  GridSpec g;
  g.q_min = g.x_min = lo;
  g.q_max = g.x_max = hi;
  g.n_q = g.n_x = n;
  return g;
}

inline GaussianMoments gaussian(double q0, double x0, double sqq, double sxx, double sqx = 0.0) {
  GaussianMoments m;
  m.mean << q0, x0;
  m.Sigma << sqq, sqx, sqx, sxx;
  return m;
}

inline double normal_pdf(double u, double var) {
  return std::exp(-0.5 * u * u / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline HamiltonianParams free_params(double m_q = 1.0, double m_x = 1.0) {
  HamiltonianParams p;
  p.m_q = m_q;
  p.m_x = m_x;
  return p;
}

}  // namespace hybrid::testing
