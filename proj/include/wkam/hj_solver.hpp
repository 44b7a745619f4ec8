#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wkam/system.hpp"

namespace wkam {

// Discrete weak KAM solution of H(x, Du) = c with residual diagnostics.
struct WeakKamField {
  ScalarField u;
  double c = 0.0;
  double residual_max = 0.0;
  double residual_l2 = 0.0;
  std::size_t residual_nodes = 0;   // nodes entering the residual norms
  std::size_t excluded_nodes = 0;   // nodes with 2(c - V) < 0, excluded and reported
  int iterations = 0;
  std::string method;
};

// |H(x, Du) - c| over nodes whose one-sided gradients agree within 5h per
// axis; the equation only holds at differentiability points.
struct ResidualStats {
  double max_abs = 0.0;
  double l2 = 0.0;
  std::size_t nodes_used = 0;
};
ResidualStats hj_residual(const ScalarField& u, const MagneticSystem& sys, double c);

struct CriticalValueOptions {
  std::vector<double> lambdas{0.02, 0.01, 0.005};  // strictly decreasing, >= 1e-4
  int directions = 16;                             // velocity directions (2 in 1D)
  int radii = 8;                                   // samples along each ray
  double cfl = 2.0;                                // SL step in cells: dt = cfl h / vmax
  int max_sweeps = 30000;                          // per rung
  double shape_tol = 1e-9;                         // sup-norm of the mean-free update
  double bound_tol = 0.02;                         // c >= loop bound - bound_tol
};

struct CriticalValueEstimate {
  double c = 0.0;                                // linear extrapolation of the last two rungs
  double loop_bound = 0.0;                       // best coordinate-loop lower bound
  std::vector<std::pair<double, double>> rungs;  // (lambda, c_lambda)
  int iterations = 0;                            // total sweeps across rungs
  ScalarField shape;                             // mean-free discounted solution, finest rung
};

// Vanishing-discount estimate of the critical value: solve
// lambda u + H(x, Du) = 0 semi-Lagrangially for each rung, read off
// c_lambda = -lambda mean(u), extrapolate linearly in lambda. The returned
// estimate is checked against the coordinate-loop lower bound.
CriticalValueEstimate estimate_critical_value(const MagneticSystem& sys,
                                              const CriticalValueOptions& opt = {});

struct SolveOptions {
  int max_steps = 400000;
  double tol = 1e-12;        // sup-norm of the mean-free step
  double cfl = 0.4;          // explicit step fraction of h / vmax
  const ScalarField* warm_start = nullptr;
};

// Godunov upwind solution of |Du + omega|^2_{g*} = 2(c - V) as the steady
// state of explicit time marching with mean renormalization. Requires a
// diagonal metric. Nodes with 2(c - V) < 0 are excluded and reported.
WeakKamField solve_critical(const MagneticSystem& sys, double c, const SolveOptions& opt = {});

// Fast-marching Riemannian distance to a node set. Flat metrics initialize
// exactly in a disk around each source, which keeps the rarefaction error
// at the source out of the O(h) budget.
ScalarField eikonal_distance(const MetricField& g, const std::vector<std::size_t>& sources);

}  // namespace wkam
