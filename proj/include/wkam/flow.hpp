#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wkam/fields.hpp"
#include "wkam/grid.hpp"
#include "wkam/subdiff.hpp"
#include "wkam/system.hpp"

namespace wkam {

enum class FlowStatus { Completed, LeftW, Stalled };

const char* flow_status_name(FlowStatus status);

// Polyline produced by the generalized gradient flow. All arrays share one
// length; the momentum and indicator are recorded at every accepted point.
// A Stalled trajectory ends at the last point whose fan could be built.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec2> points;
  std::vector<Vec2> p_sharp;
  std::vector<double> indicator;
  FlowStatus status = FlowStatus::Completed;
  std::string note;

  const Vec2& endpoint() const { return points.back(); }
};

struct FlowOptions {
  double eps_f = 1e-3;   // leave W once the energy gap drops to this level
  SubdiffOptions subdiff;
};

// Heun integration of x' = H_p(x, p#(x)) with the momentum selection frozen
// within each step; the right-hand side is discontinuous across the singular
// set, so no higher-order smoothness is assumed. step must lie in (0, h/2].
Trajectory integrate_g1(const ScalarField& u, const MagneticSystem& sys, double c,
                        const Vec2& x0, double T, double step,
                        const FlowOptions& opt = {});

// As integrate_g1 with the velocity rescaled by 1/f, f = c - V the energy
// gap; stops with LeftW when f drops to eps_f along the way.
Trajectory integrate_g2(const ScalarField& u, const MagneticSystem& sys, double c,
                        const Vec2& x0, double T, double step,
                        const FlowOptions& opt = {});

struct ReparamReport {
  double max_resample_dist = 0.0;  // rescaled-time pointwise comparison
  double frechet_dist = 0.0;       // discrete Frechet between the point sets
  double s_total = 0.0;            // energy-gap time change over the g1 leg
  std::size_t compared = 0;        // g2 samples inside the common s-range
  bool monotone = false;           // s strictly increased every step
};

// Check that g2 is g1 run in the rescaled time s(t) = integral of f along
// g1 (trapezoid rule). Both trajectories must be Completed and share x0.
ReparamReport verify_reparam(const Trajectory& g1, const Trajectory& g2,
                             const EnergyGapField& gap);

struct InvarianceReport {
  double min_indicator = 0.0;
  double delta_sing = 0.0;
  bool applicable = false;  // start point classified Singular
  bool pass = false;
};

// Min indicator along the trajectory; pass iff it stays >= delta_sing / 2.
// A start that is not Singular yields a vacuous pass, flagged inapplicable.
InvarianceReport verify_invariance(const Trajectory& traj, double delta_sing);

// One variant run of the uniqueness probe: either a different fan radius for
// the momentum selection, or a precomputed smooth momentum field (sampled
// gradient of a mollified solution) with its resolution m.
struct FlowPerturbation {
  double fan_radius = 0.0;           // 0 -> integrator default
  const ComponentField* driver = nullptr;
  double m = 0.0;                    // driver resolution, used in the bound
};

struct UniquenessReport {
  double max_pairwise = 0.0;  // sup over time of torus distance, max over pairs
  double bound = 0.0;         // c_u * (1/m_min + h + step)
  double c_u = 0.0;
  bool all_completed = false;
  bool pass = false;
  std::size_t runs = 0;
};

UniquenessReport uniqueness_probe(const ScalarField& u, const MagneticSystem& sys,
                                  double c, const Vec2& x0, double T, double step,
                                  const std::vector<FlowPerturbation>& perturbations,
                                  double c_u = 5.0, const FlowOptions& opt = {});

// max-over-coupling distance between two polylines on the torus.
double discrete_frechet(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                        const PeriodicGrid& grid);

// Columns t, x, y, indicator, p_sharp_norm.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace wkam
