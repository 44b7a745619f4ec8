#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wkam/flow.hpp"
#include "wkam/system.hpp"

namespace wkam {

// True when the bump kernel of width 1/m spans at least three grid cells
// (support diameter 2/m >= 3h). Narrower kernels degenerate to point masses.
bool kernel_resolvable(int m, const PeriodicGrid& grid);

// Periodic convolution with a radial C-infinity bump supported in B(0, 1/m),
// sampled on grid nodes and renormalized to unit discrete mass. Constants are
// reproduced exactly; smoothing error is at most Lip(u)/m in sup norm.
// Throws "kernel under-resolved" when kernel_resolvable fails.
ScalarField mollify(const ScalarField& u, int m);

// Central-difference gradient of u at every node.
ComponentField gradient_field(const ScalarField& u);

// One smoothed field plus its gradient grid per ladder width.
struct MollifiedFamily {
  std::vector<int> ladder;
  std::vector<ScalarField> fields;
  std::vector<ComponentField> gradients;
};
MollifiedFamily build_family(const ScalarField& u,
                             const std::vector<int>& ladder = {16, 32, 64, 128});

// Velocity law for smooth-field integration and the energy-gap tracker:
// Riemannian uses the plain dual gradient, Magnetic rescales by the gap f,
// matching the two generalized flows in the singular setting.
enum class FlowMode { Riemannian, Magnetic };

// Classical Heun integration of the smooth field u^m: the velocity is
// re-evaluated at the predictor point, no superdifferential machinery.
// Riemannian: dx/dt = H_p(x, Du^m); Magnetic: dx/dt = H_p(x, Du^m) / f.
// Truncates with status LeftW when the gap falls to eps_f.
Trajectory smooth_flow(const ScalarField& um, const MagneticSystem& sys, FlowMode mode,
                       double c, const Vec2& x0, double T, double step,
                       double eps_f = 1e-3);

// Energy-gap tracker psi along a trajectory of u^m.
//   Riemannian: psi = |Du^m|^2_{g*} - 1
//   Magnetic:   psi = (H(x, Du^m) - c) / (c - V)   (= 1/2 |Du^m + w|^2_{gt*} - 1)
// c_fit is the smallest C >= 0 with psi(t_k) <= exp(-C t_k) psi(0) + slack for
// every k; slack = 1/m + 5h absorbs the smoothing and grid error.
struct PsiTrace {
  int m = 0;
  std::vector<double> times;
  std::vector<double> psi;
  double slack = 0.0;
  double c_fit = 0.0;
  bool fit_ok = false;
};
PsiTrace psi_track(const ScalarField& um, const MagneticSystem& sys, FlowMode mode,
                   double c, const Trajectory& gamma, int m);

// Sampled verification of the Hessian identities. At nodes where the second
// differences are stable under doubling the stencil spacing (within
// stencil_tol), form the covariant Hessian of u (Christoffel-corrected, plus
// the lowered nabla-X term in magnetic mode) and report
//   defect_max: max |T(xi, v)| over unit xi, v the (rescaled) gradient flow
//               direction; the identity T(., v) = 0 holds for exact solutions
//   k_fit:      smallest K with T(xi, xi) <= K * denom over all sampled xi,
//               denom = <xi,xi> - <xi,v>^2 (Riemannian) resp.
//               <xi,xi> - 1/2 <xi,v>^2 (magnetic), skipping denom < 0.1
struct HessianOptions {
  double min_value = 0.0;    // keep nodes with u >= min_value
  double stencil_tol = 0.0;  // stability tolerance, 0 -> 10h
  int xi_per_point = 0;      // random directions per node, 0 -> n_samples
  std::uint64_t seed = 0x77c0ffeeULL;
};
struct HessianReport {
  FlowMode mode = FlowMode::Riemannian;
  int requested = 0;   // sample count asked for
  int usable = 0;      // nodes passing the filters
  double defect_max = 0.0;
  double k_fit = 0.0;
  bool warn = false;  // usable < requested / 2
};
HessianReport hessian_checks(const ScalarField& u, const MagneticSystem& sys, FlowMode mode,
                             double c, int n_samples, const HessianOptions& opt = {});

// CSV columns m,t,psi; JSON carries the report fields verbatim.
void save_psi_csv(const PsiTrace& trace, const std::string& path);
void save_hessian_json(const HessianReport& report, const std::string& path);

}  // namespace wkam
