#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hybrid/error.hpp"

namespace hybrid {

enum class Boundary { truncated, periodic };

enum class Axis { q, x };

/// Uniform cell-centred grid over the (q, x) configuration plane.
/// Row index i runs over the quantum coordinate q, column index j over the
/// classical coordinate x.
struct GridSpec {
  double q_min = -8.0;
  double q_max = 8.0;
  int n_q = 128;
  double x_min = -8.0;
  double x_max = 8.0;
  int n_x = 128;
  Boundary boundary = Boundary::truncated;

  double dq() const { return (q_max - q_min) / n_q; }
  double dx() const { return (x_max - x_min) / n_x; }
  double cell_area() const { return dq() * dx(); }
  double q(int i) const { return q_min + (i + 0.5) * dq(); }
  double x(int j) const { return x_min + (j + 0.5) * dx(); }
  double spacing(Axis a) const { return a == Axis::q ? dq() : dx(); }
  int points(Axis a) const { return a == Axis::q ? n_q : n_x; }
  std::size_t size() const { return static_cast<std::size_t>(n_q) * n_x; }

  /// Throws RangeError if bounds, sizes or spacings are invalid.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

/// Dense n_q x n_x array of doubles, row-major.
class Field {
 public:
  Field() = default;
  Field(int n_q, int n_x, double value = 0.0)
      : n_q_(n_q), n_x_(n_x), data_(static_cast<std::size_t>(n_q) * n_x, value) {}
  explicit Field(const GridSpec& g, double value = 0.0) : Field(g.n_q, g.n_x, value) {}

  int n_q() const { return n_q_; }
  int n_x() const { return n_x_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * n_x_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * n_x_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * n_x_; }
  const double* row(int i) const { return data_.data() + static_cast<std::size_t>(i) * n_x_; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const Field&) const = default;

 private:
  int n_q_ = 0;
  int n_x_ = 0;
  std::vector<double> data_;
};

/// Tabulate f(q, x) at the cell centres of g.
template <class F>
Field tabulate(const GridSpec& g, F&& f) {
  Field out(g);
  for (int i = 0; i < g.n_q; ++i) {
    const double q = g.q(i);
    for (int j = 0; j < g.n_x; ++j) out(i, j) = f(q, g.x(j));
  }
  return out;
}

/// Neumaier-compensated sum in a fixed index order.
double compensated_sum(std::span<const double> v);

/// Midpoint quadrature of a field over the grid.
double integrate(const Field& f, const GridSpec& g);

/// Midpoint quadrature of a(i,j) * b(i,j).
double integrate_product(const Field& a, const Field& b, const GridSpec& g);

/// The hybrid ensemble: probability density P(q, x) and action S(q, x).
class HybridState {
 public:
  /// Validated and normalised state. Throws InvalidState for negative or
  /// non-finite entries, ZeroMass if P carries no probability.
  static HybridState make(GridSpec grid, Field P, Field S);

  /// Validated state without normalisation.
  static HybridState unnormalized(GridSpec grid, Field P, Field S);

  const GridSpec& grid() const { return grid_; }
  const Field& P() const { return P_; }
  const Field& S() const { return S_; }

  /// Total probability sum(P) dq dx.
  double mass() const { return integrate(P_, grid_); }

  /// Factor applied to P by the most recent normalisation (1 if none).
  double rescale_factor() const { return rescale_; }

 private:
  HybridState(GridSpec g, Field P, Field S) : grid_(g), P_(std::move(P)), S_(std::move(S)) {}
  friend HybridState normalize(const HybridState&);

  GridSpec grid_;
  Field P_;
  Field S_;
  double rescale_ = 1.0;
};

HybridState normalize(const HybridState& state);

struct Marginals {
  std::vector<double> P_q;
  std::vector<double> P_x;
};

Marginals marginals(const HybridState& state);

/// Integral of |P - P_q P_x| over the grid.
double separability_defect(const HybridState& state);

}  // namespace hybrid
