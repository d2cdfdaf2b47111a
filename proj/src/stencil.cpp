#include "hybrid/stencil.hpp"

namespace hybrid {

namespace {

StencilRow make_row(std::initializer_list<int> idx, std::initializer_list<double> c, double scale) {
  StencilRow r;
  r.len = static_cast<int>(idx.size());
  int k = 0;
  for (int i : idx) r.idx[k++] = i;
  k = 0;
  for (double v : c) r.c[k++] = v * scale;
  return r;
}

int wrap(int i, int n) { return ((i % n) + n) % n; }

}  // namespace

Stencil1D::Stencil1D(int n, double h, Boundary boundary, DerivativeOrder order) : rows_(n) {
  const bool first = order == DerivativeOrder::first;
  const double s4 = first ? 1.0 / (12.0 * h) : 1.0 / (12.0 * h * h);
  const auto interior = [&](int i) {
    if (first)
      return make_row({wrap(i - 2, n), wrap(i - 1, n), wrap(i + 1, n), wrap(i + 2, n)},
                      {1.0, -8.0, 8.0, -1.0}, s4);
    return make_row({wrap(i - 2, n), wrap(i - 1, n), i, wrap(i + 1, n), wrap(i + 2, n)},
                    {-1.0, 16.0, -30.0, 16.0, -1.0}, s4);
  };
  for (int i = 0; i < n; ++i) rows_[i] = interior(i);
  if (boundary == Boundary::periodic) return;

  if (first) {
    const double s2 = 1.0 / (2.0 * h);
    rows_[0] = make_row({0, 1, 2}, {-3.0, 4.0, -1.0}, s2);
    rows_[1] = make_row({0, 2}, {-1.0, 1.0}, s2);
    rows_[n - 2] = make_row({n - 3, n - 1}, {-1.0, 1.0}, s2);
    rows_[n - 1] = make_row({n - 3, n - 2, n - 1}, {1.0, -4.0, 3.0}, s2);
  } else {
    const double s2 = 1.0 / (h * h);
    rows_[0] = make_row({0, 1, 2, 3}, {2.0, -5.0, 4.0, -1.0}, s2);
    rows_[1] = make_row({0, 1, 2}, {1.0, -2.0, 1.0}, s2);
    rows_[n - 2] = make_row({n - 3, n - 2, n - 1}, {1.0, -2.0, 1.0}, s2);
    rows_[n - 1] = make_row({n - 4, n - 3, n - 2, n - 1}, {-1.0, 4.0, -5.0, 2.0}, s2);
  }
}

Stencil1D make_stencil(const GridSpec& g, Axis a, DerivativeOrder order) {
  return Stencil1D(g.points(a), g.spacing(a), g.boundary, order);
}

namespace {

Field apply(const Field& f, const GridSpec& g, Axis a, DerivativeOrder order) {
  const Stencil1D st = make_stencil(g, a, order);
  Field out(g);
  if (a == Axis::q) {
    for (int i = 0; i < g.n_q; ++i) {
      const StencilRow& r = st.row(i);
      double* o = out.row(i);
      for (int k = 0; k < r.len; ++k) {
        const double c = r.c[k];
        const double* in = f.row(r.idx[k]);
        for (int j = 0; j < g.n_x; ++j) o[j] += c * in[j];
      }
    }
  } else {
    for (int i = 0; i < g.n_q; ++i) {
      const double* in = f.row(i);
      double* o = out.row(i);
      for (int j = 0; j < g.n_x; ++j) o[j] = st.apply_at(in, 1, j);
    }
  }
  return out;
}

}  // namespace

Field d1(const Field& f, const GridSpec& g, Axis a) {
  return apply(f, g, a, DerivativeOrder::first);
}

Field d2(const Field& f, const GridSpec& g, Axis a) {
  return apply(f, g, a, DerivativeOrder::second);
}

Field d1_adjoint(const Field& f, const GridSpec& g, Axis a) {
  const Stencil1D st = make_stencil(g, a, DerivativeOrder::first);
  Field out(g);
  if (a == Axis::q) {
    for (int i = 0; i < g.n_q; ++i) {
      const StencilRow& r = st.row(i);
      const double* in = f.row(i);
      for (int k = 0; k < r.len; ++k) {
        const double c = r.c[k];
        double* o = out.row(r.idx[k]);
        for (int j = 0; j < g.n_x; ++j) o[j] += c * in[j];
      }
    }
  } else {
    for (int i = 0; i < g.n_q; ++i) {
      const double* in = f.row(i);
      double* o = out.row(i);
      for (int j = 0; j < g.n_x; ++j) {
        const StencilRow& r = st.row(j);
        for (int k = 0; k < r.len; ++k) o[r.idx[k]] += r.c[k] * in[j];
      }
    }
  }
  return out;
}

}  // namespace hybrid
