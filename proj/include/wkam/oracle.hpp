#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "wkam/system.hpp"

namespace wkam::oracle {

// Closed-form references used by tests and acceptance runs. Everything here
// is independent of the solver modules.

// Pendulum on the circle: V(x) = cos(2 pi x) - 1, omega = 0, c = 0,
// u(x) = (2/pi)(1 - cos(pi x)) on [0, 1/2], mirrored on [1/2, 1].
struct Pendulum1D {
  static double potential(double x);
  static double critical_value() { return 0.0; }
  static double u(double x);
  // One-sided derivatives (left, right); they differ only at the kink x = 1/2.
  static std::pair<double, double> u_branches(double x);
  static MagneticSystem system(int n);
  static ScalarField sample_u(const PeriodicGrid& grid);
};

// Constant 1-form a dx on the circle, V = 0: c = a^2/2 and u = 0.
struct Magnetic1D {
  double a = 1.0;

  double critical_value() const { return 0.5 * a * a; }
  // The coordinate-loop lower bound C1^2/(4 C2); equals the critical value.
  double loop_bound() const;
  MagneticSystem system(int n) const;
};

// Flat-torus distance to a source point: u(x) = min over integer shifts k of
// |x - x0 - k|. Cut locus: the shifted lines {x = x0 + 1/2} and {y = y0 + 1/2}.
struct TorusDistance {
  Vec2 x0{0.0, 0.0};

  double value(const Vec2& x) const;
  // Unit directions from each minimizing shift (gradient branches off the cut).
  std::vector<Vec2> gradient_branches(const Vec2& x, double tie_tol = 1e-9) const;
  ScalarField sample(const PeriodicGrid& grid) const;
  struct CutLines {
    double xline;
    double yline;
  };
  CutLines cut_locus() const;
  bool on_cut(const Vec2& x, double tol) const;
  // The eikonal field as a magnetic system: flat metric, omega = 0, V = 0.
  // Its natural critical level for the indicator algebra is c = 1/2.
  static MagneticSystem eikonal_system(int n);
  static double eikonal_c() { return 0.5; }
};

// Action of a piecewise-linear path given by lifted (unwrapped) vertices,
// traversed in total time T at constant speed per segment. Field terms are
// integrated with 4-point Gauss quadrature per segment.
double path_action(const MagneticSystem& sys, const std::vector<Vec2>& lifted, double T);

// Minimize the discretized action over piecewise-linear paths from x to y in
// time T by nested coordinate descent over interior vertices, with random
// restarts and endpoint winding search. Returns an upper bound on the true
// infimum; callers must only assert one-sided inequalities.
struct BruteForceOptions {
  int segments = 16;       // <= 64
  int restarts = 50;       // descent runs, split across windings
  int max_winding = 2;     // endpoint lift search range per axis
  std::uint64_t seed = 20260816;
};
double brute_force_action(const MagneticSystem& sys, const Vec2& x, const Vec2& y, double T,
                          const BruteForceOptions& opt = {});

// c and the loop bound for the 1D magnetic family; the two agree exactly.
struct MagneticCritical {
  double c;
  double bound;
};
MagneticCritical magnetic_critical(double a);

}  // namespace wkam::oracle
