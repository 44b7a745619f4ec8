#include "wkam/geometry.hpp"

namespace wkam {

VectorFieldGrid sharp(const OneFormField& omega, const MetricField& g) {
  if (!omega.grid().same_shape(g.grid()))
    throw std::invalid_argument("sharp: form grid does not match metric grid");
  VectorFieldGrid X(g.grid());
  for (std::size_t id = 0; id < g.grid().size(); ++id) {
    if (!g.valid_at(id)) continue;
    const Vec2 x = g.dual_at(id).apply(omega.value(id));
    X.set(0, id, x[0]);
    if (g.grid().dim() == 2) X.set(1, id, x[1]);
  }
  return X;
}

OneFormField flat_iso(const VectorFieldGrid& X, const MetricField& g) {
  if (!X.grid().same_shape(g.grid()))
    throw std::invalid_argument("flat_iso: vector grid does not match metric grid");
  OneFormField omega(g.grid());
  for (std::size_t id = 0; id < g.grid().size(); ++id) {
    if (!g.valid_at(id)) continue;
    const Vec2 w = g.at(id).apply(X.value(id));
    omega.set(0, id, w[0]);
    if (g.grid().dim() == 2) omega.set(1, id, w[1]);
  }
  return omega;
}

namespace {

// 4th-order central difference along one axis of a per-node metric component.
double d4(const MetricField& g, int comp, int axis, int i, int j, double h) {
  auto read = [&](int di, int dj) {
    const std::size_t id = g.grid().id(i + di, j + dj);
    const Mat2 m = g.at(id);
    return comp == 0 ? m.a11 : (comp == 1 ? m.a12 : m.a22);
  };
  const int sx = axis == 0 ? 1 : 0;
  const int sy = axis == 0 ? 0 : 1;
  // Grouped as differences so constant components cancel exactly.
  const double num = 8.0 * (read(sx, sy) - read(-sx, -sy)) -
                     (read(2 * sx, 2 * sy) - read(-2 * sx, -2 * sy));
  return num / (12.0 * h);
}

}  // namespace

Christoffel christoffel(const MetricField& g, std::size_t node) {
  const auto& grid = g.grid();
  const auto c = grid.coords(node);
  const int dim = grid.dim();
  const double h = grid.h();

  // dg[l][i][j] = d_l g_ij
  double dg[2][2][2] = {};
  for (int l = 0; l < dim; ++l) {
    dg[l][0][0] = d4(g, 0, l, c[0], c[1], h);
    if (dim == 2) {
      dg[l][0][1] = dg[l][1][0] = d4(g, 1, l, c[0], c[1], h);
      dg[l][1][1] = d4(g, 2, l, c[0], c[1], h);
    }
  }

  const Mat2 dual = g.dual_at(node);
  const double gi[2][2] = {{dual.a11, dual.a12}, {dual.a12, dual.a22}};

  Christoffel out;
  for (int k = 0; k < dim; ++k)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double s = 0.0;
        for (int l = 0; l < dim; ++l)
          s += gi[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
        out.k[k][i][j] = 0.5 * s;
      }
  return out;
}

LoopIntegrals loop_integrals(const OneFormField& omega, const MetricField& g, int axis,
                             int other) {
  if (!omega.grid().same_shape(g.grid()))
    throw std::invalid_argument("loop_integrals: form grid does not match metric grid");
  const auto& grid = g.grid();
  if (axis < 0 || axis >= grid.dim())
    throw std::invalid_argument("loop_integrals: axis out of range for grid dimension");
  const double h = grid.h();
  LoopIntegrals out;
  for (int s = 0; s < grid.n(); ++s) {
    const std::size_t id = (axis == 0) ? grid.id(s, other) : grid.id(other, s);
    out.c1 += omega.comp(axis, id) * h;
    const Mat2 m = g.at(id);
    const double gaa = (axis == 0) ? m.a11 : m.a22;
    out.c2 += 0.5 * gaa * h;
  }
  return out;
}

}  // namespace wkam
