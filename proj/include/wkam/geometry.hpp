#pragma once

#include "wkam/fields.hpp"

namespace wkam {

// Musical isomorphisms: X^i = g^{ij} omega_j and its inverse.
VectorFieldGrid sharp(const OneFormField& omega, const MetricField& g);
OneFormField flat_iso(const VectorFieldGrid& X, const MetricField& g);

// g~ = f * g with dual g~* = g*/f. Nodes with f <= eps_f are masked as
// outside W; evaluating the result there raises an error naming the set.
MetricField conformal_rescale(const MetricField& g, const ScalarField& f, double eps_f = 1e-8);

// Christoffel symbols Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij),
// metric derivatives by 4th-order central differences with periodic wrap.
struct Christoffel {
  double k[2][2][2] = {};  // [k][i][j], symmetric in (i,j)
};
Christoffel christoffel(const MetricField& g, std::size_t node);

// C1 = loop integral of omega along the coordinate circle of the given axis,
// C2 = half the g-energy of that loop (unit parameter speed). The loop passes
// through the node row/column at index other = 0.
struct LoopIntegrals {
  double c1 = 0.0;
  double c2 = 0.0;
  double bound() const { return c1 * c1 / (4.0 * c2); }
};
LoopIntegrals loop_integrals(const OneFormField& omega, const MetricField& g, int axis, int other = 0);

}  // namespace wkam
