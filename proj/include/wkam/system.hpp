#pragma once

#include "wkam/fields.hpp"

namespace wkam {

// Magnetic Lagrangian system on a periodic grid:
//   L(x,v) = 1/2 g(v,v) - omega(v) - V(x),
//   H(x,p) = 1/2 g*(p+omega, p+omega) + V(x),
// with max V = 0 enforced by PotentialField.
struct MagneticSystem {
  PeriodicGrid grid;
  MetricField g;
  OneFormField omega;
  PotentialField V;

  MagneticSystem(PeriodicGrid grid_, MetricField g_, OneFormField omega_, PotentialField V_)
      : grid(grid_), g(std::move(g_)), omega(std::move(omega_)), V(std::move(V_)) {
    if (!g.grid().same_shape(grid) || !omega.grid().same_shape(grid) ||
        !V.grid().same_shape(grid))
      throw std::invalid_argument("MagneticSystem: fields do not share the grid");
  }

  double hamiltonian_node(std::size_t id, const Vec2& p) const {
    const Vec2 q = p + omega.value(id);
    return 0.5 * g.norm2_dual(id, q) + V.at(id);
  }

  double hamiltonian(const Vec2& x, const Vec2& p) const {
    const Vec2 q = p + omega.interp(x);
    return 0.5 * g.dual_interp(x).quad(q) + V.interp(x);
  }

  // H_p = (p + omega)^sharp, evaluated with bilinear field interpolation.
  Vec2 hamiltonian_gradient_p(const Vec2& x, const Vec2& p) const {
    const Vec2 q = p + omega.interp(x);
    return g.dual_interp(x).apply(q);
  }

  double lagrangian(const Vec2& x, const Vec2& v) const {
    return 0.5 * g.interp(x).quad(v) - dot(omega.interp(x), v) - V.interp(x);
  }

  double lagrangian_node(std::size_t id, const Vec2& v) const {
    return 0.5 * g.at(id).quad(v) - dot(omega.value(id), v) - V.at(id);
  }

  // sup over nodes of |H_p| at solution momenta: sqrt(2(c - V)) measured in g.
  double speed_bound(double c) const {
    double s = 0.0;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      const double gap = 2.0 * (c - V.at(id));
      if (gap > s) s = gap;
    }
    return std::sqrt(std::max(s, 0.0));
  }
};

// f(x) = c - V(x) on W = {c > V}; f > eps_f on the mask.
struct EnergyGapField {
  ScalarField f;
  std::vector<std::uint8_t> mask;
  double c;
  double eps_f;

  EnergyGapField(const MagneticSystem& sys, double c_, double eps_f_ = 1e-8)
      : f(sys.grid), mask(sys.grid.size(), 0), c(c_), eps_f(eps_f_) {
    for (std::size_t id = 0; id < sys.grid.size(); ++id) {
      f.at(id) = c - sys.V.at(id);
      mask[id] = f.at(id) > eps_f ? 1 : 0;
    }
  }

  bool in_w(std::size_t id) const { return mask[id] != 0; }
  double interp(const Vec2& x) const { return f.interp(x); }
};

}  // namespace wkam
