#pragma once

#include <array>
#include <vector>

#include "hybrid/grid.hpp"

namespace hybrid {

// Finite-difference operators on the cell-centred grid: fourth-order central
// stencils in the interior; on truncated boundaries the first two and last
// two points use second-order stencils (one-sided at the outermost point).
// Every row is exact on quadratic polynomials.

enum class DerivativeOrder { first, second };

struct StencilRow {
  int len = 0;
  std::array<int, 5> idx{};
  std::array<double, 5> c{};
};

class Stencil1D {
 public:
  Stencil1D(int n, double h, Boundary boundary, DerivativeOrder order);

  int n() const { return static_cast<int>(rows_.size()); }
  const StencilRow& row(int i) const { return rows_[i]; }

  /// Value of the derivative at point i of a strided line.
  double apply_at(const double* f, std::ptrdiff_t stride, int i) const {
    const StencilRow& r = rows_[i];
    double s = 0.0;
    for (int k = 0; k < r.len; ++k) s += r.c[k] * f[r.idx[k] * stride];
    return s;
  }

 private:
  std::vector<StencilRow> rows_;
};

Stencil1D make_stencil(const GridSpec& g, Axis a, DerivativeOrder order);

/// First derivative along an axis.
Field d1(const Field& f, const GridSpec& g, Axis a);

/// Second derivative along an axis.
Field d2(const Field& f, const GridSpec& g, Axis a);

/// Transpose of the first-derivative matrix applied to f. Satisfies
/// sum(u * d1(v)) == sum(d1_adjoint(u) * v) for all u, v; in the interior it
/// equals -d1(f).
Field d1_adjoint(const Field& f, const GridSpec& g, Axis a);

}  // namespace hybrid
