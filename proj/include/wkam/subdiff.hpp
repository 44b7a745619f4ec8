#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wkam/fields.hpp"
#include "wkam/grid.hpp"
#include "wkam/system.hpp"

namespace wkam {

// One reachable-gradient cluster at a query point, tagged with the
// Hamiltonian value it produces there.
struct ReachableGradient {
  Vec2 p{0.0, 0.0};
  double hamiltonian = 0.0;
};

struct MomentumSelection {
  Vec2 p_sharp{0.0, 0.0};
  double indicator = 0.0;
};

// Superdifferential sample at a point: cluster representatives of the
// reachable gradients, their convex hull, and the energy-minimal momentum
// p_sharp with indicator = c - H(x, p_sharp).
struct GradientFan {
  Vec2 x{0.0, 0.0};
  std::vector<ReachableGradient> reachable;
  std::vector<Vec2> hull;  // 1D: 1-2 points on axis 0; 2D: CCW polygon
  Vec2 p_sharp{0.0, 0.0};
  double indicator = 0.0;
};

enum class NodeClass { Regular, Boundary, Singular };

const char* node_class_name(NodeClass cls);

struct SubdiffOptions {
  double radius = 0.0;      // fan radius, 0 -> 2h; must lie in [2h, 8h]
  double theta_c = 0.0;     // cluster merge radius, 0 -> max(6h, 0.05)
  double delta_sing = 0.0;  // classification threshold, 0 -> max(10h, 0.02)
};

// Gradients of u at differentiable nodes within B(x, r), merged by
// complete-linkage clustering with radius theta_c and sorted by component.
// A node counts as differentiable when its one-sided gradients agree within
// 5h on every axis. Throws when the ball holds no differentiable node.
std::vector<ReachableGradient> reachable_gradients(const ScalarField& u,
                                                   const MagneticSystem& sys,
                                                   const Vec2& x, double r,
                                                   double theta_c = 0.0);

// Convex hull of covectors: interval endpoints in 1D, CCW polygon in 2D.
// Points that coincide within 1e-12 collapse to a single vertex.
std::vector<Vec2> gradient_hull(const std::vector<Vec2>& points, int dim);

// argmin of H(x, .) over the convex hull of the given covectors, with
// indicator = c - H(x, p_sharp). Since H is quadratic with form g*, the
// minimizer is the g*-orthogonal projection of -omega onto the hull.
MomentumSelection project_momentum(const std::vector<Vec2>& points, int dim,
                                   const Mat2& gstar, const Vec2& omega,
                                   double potential, double c);

// project_momentum with g*, omega, V interpolated from the system at x.
MomentumSelection momentum_selection(const std::vector<ReachableGradient>& reachable,
                                     const MagneticSystem& sys, double c,
                                     const Vec2& x);

// reachable_gradients + hull + momentum selection at one point.
GradientFan gradient_fan(const ScalarField& u, const MagneticSystem& sys,
                         double c, const Vec2& x,
                         const SubdiffOptions& opt = {});

// Singular iff indicator > delta_sing, Boundary iff |indicator| <= delta_sing,
// Regular otherwise.
NodeClass classify(double indicator, double delta_sing);

struct SingularSet {
  ScalarField indicator;
  std::vector<NodeClass> classes;
  std::vector<std::size_t> singular_nodes;
  // Grid closure of the singular mask (singular nodes plus face neighbors),
  // an approximation of the cut set from above.
  std::vector<std::size_t> cut_nodes;
  double delta_sing = 0.0;
  std::size_t fan_failures = 0;
};

// Classify every node of u's grid. Nodes whose fan holds no differentiable
// neighbor degrade to Boundary with indicator 0 instead of stopping the scan.
SingularSet singular_set(const ScalarField& u, const MagneticSystem& sys,
                         double c, const SubdiffOptions& opt = {});

// <stem>.csv rows (node, i, j, indicator, class) plus a <stem>.json summary.
void save_singular_set(const SingularSet& s, const std::string& stem);

void save_fan_json(const GradientFan& fan, const std::string& path);

}  // namespace wkam
