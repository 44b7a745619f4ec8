#include "wkam/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace wkam {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Momentum at a point: the fan selection for generalized runs, or a sampled
// smooth covector field for mollified-driver runs.
struct MomentumSource {
  const ScalarField* u = nullptr;
  const MagneticSystem* sys = nullptr;
  double c = 0.0;
  SubdiffOptions subdiff;
  const ComponentField* driver = nullptr;

  // Throws the fan error when the neighborhood is fully singular.
  void eval(const Vec2& x, Vec2& p, double& indicator) const {
    if (driver != nullptr) {
      p = driver->interp(x);
      indicator = c - sys->hamiltonian(x, p);
      return;
    }
    const GradientFan fan = gradient_fan(*u, *sys, c, x, subdiff);
    p = fan.p_sharp;
    indicator = fan.indicator;
  }
};

Trajectory integrate_core(const ScalarField& u, const MagneticSystem& sys, double c,
                          const Vec2& x0, double T, double step, bool rescaled,
                          const MomentumSource& source, const FlowOptions& opt) {
  const PeriodicGrid& grid = sys.grid;
  if (!u.grid().same_shape(grid))
    throw std::invalid_argument("flow: field and system grids differ");
  const double h = grid.h();
  if (!(step > 0.0) || step > 0.5 * h + 1e-15)
    throw std::invalid_argument("flow: step must lie in (0, h/2]");
  if (!(T > 0.0)) throw std::invalid_argument("flow: horizon must be positive");

  const EnergyGapField gap(sys, c, opt.eps_f);
  Vec2 x = grid.wrap_point(x0);
  if (!(gap.interp(x) > opt.eps_f))
    throw std::invalid_argument("flow: start point lies outside W");

  Trajectory traj;
  auto append = [&](double t, const Vec2& pt) -> bool {
    Vec2 p{0.0, 0.0};
    double ind = 0.0;
    try {
      source.eval(pt, p, ind);
    } catch (const std::runtime_error& err) {
      traj.status = FlowStatus::Stalled;
      traj.note = std::string(err.what()) + " at t=" + fmt17(t);
      return false;
    }
    traj.times.push_back(t);
    traj.points.push_back(pt);
    traj.p_sharp.push_back(p);
    traj.indicator.push_back(ind);
    return true;
  };

  if (!append(0.0, x)) return traj;

  double t = 0.0;
  while (t < T - 1e-12) {
    const double dt = std::min(step, T - t);
    const Vec2 p = traj.p_sharp.back();
    const double s1 = rescaled ? 1.0 / gap.interp(x) : 1.0;
    const Vec2 v1 = sys.hamiltonian_gradient_p(x, p) * s1;
    const Vec2 xstar = grid.wrap_point(x + dt * v1);
    const double fstar = gap.interp(xstar);
    if (rescaled && fstar <= opt.eps_f) {
      traj.status = FlowStatus::LeftW;
      break;
    }
    const double s2 = rescaled ? 1.0 / fstar : 1.0;
    const Vec2 v2 = sys.hamiltonian_gradient_p(xstar, p) * s2;
    const Vec2 xn = grid.wrap_point(x + (0.5 * dt) * (v1 + v2));
    if (gap.interp(xn) <= opt.eps_f) {
      traj.status = FlowStatus::LeftW;
      break;
    }
    t += dt;
    x = xn;
    if (!append(t, x)) break;
  }
  return traj;
}

}  // namespace

const char* flow_status_name(FlowStatus status) {
  switch (status) {
    case FlowStatus::Completed: return "completed";
    case FlowStatus::LeftW: return "left-w";
    case FlowStatus::Stalled: return "stalled";
  }
  return "unknown";
}

Trajectory integrate_g1(const ScalarField& u, const MagneticSystem& sys, double c,
                        const Vec2& x0, double T, double step, const FlowOptions& opt) {
  MomentumSource src{&u, &sys, c, opt.subdiff, nullptr};
  return integrate_core(u, sys, c, x0, T, step, false, src, opt);
}

Trajectory integrate_g2(const ScalarField& u, const MagneticSystem& sys, double c,
                        const Vec2& x0, double T, double step, const FlowOptions& opt) {
  MomentumSource src{&u, &sys, c, opt.subdiff, nullptr};
  return integrate_core(u, sys, c, x0, T, step, true, src, opt);
}

ReparamReport verify_reparam(const Trajectory& g1, const Trajectory& g2,
                             const EnergyGapField& gap) {
  if (g1.status != FlowStatus::Completed || g2.status != FlowStatus::Completed)
    throw std::invalid_argument("verify_reparam: both trajectories must be Completed");
  if (g1.points.size() < 2 || g2.points.size() < 2)
    throw std::invalid_argument("verify_reparam: trajectories too short");
  const PeriodicGrid& grid = gap.f.grid();
  if (grid.torus_dist(g1.points.front(), g2.points.front()) > 1e-9)
    throw std::invalid_argument("verify_reparam: trajectories start apart");

  ReparamReport rep;
  std::vector<double> s(g1.points.size(), 0.0);
  rep.monotone = true;
  for (std::size_t k = 1; k < g1.points.size(); ++k) {
    const double dt = g1.times[k] - g1.times[k - 1];
    const double inc =
        0.5 * dt * (gap.interp(g1.points[k - 1]) + gap.interp(g1.points[k]));
    if (!(inc > 0.0)) rep.monotone = false;
    s[k] = s[k - 1] + inc;
  }
  rep.s_total = s.back();

  // Align over the common rescaled-time range: g2 at time sigma should sit
  // where g1 was at t with s(t) = sigma. Tails beyond s_total carry no
  // set-coincidence information and are left out of both measures.
  std::vector<Vec2> aligned, matched;
  for (std::size_t j = 0; j < g2.points.size(); ++j) {
    const double sigma = g2.times[j];
    if (sigma > rep.s_total + 1e-12) break;
    const auto it = std::upper_bound(s.begin(), s.end(), sigma);
    std::size_t k = static_cast<std::size_t>(std::distance(s.begin(), it));
    if (k == 0) k = 1;
    if (k >= s.size()) k = s.size() - 1;
    const double den = s[k] - s[k - 1];
    const double theta = den > 0.0 ? std::clamp((sigma - s[k - 1]) / den, 0.0, 1.0) : 0.0;
    const Vec2 seg = grid.torus_displacement(g1.points[k - 1], g1.points[k]);
    const Vec2 at = grid.wrap_point(g1.points[k - 1] + theta * seg);
    rep.max_resample_dist =
        std::max(rep.max_resample_dist, grid.torus_dist(at, g2.points[j]));
    aligned.push_back(at);
    matched.push_back(g2.points[j]);
    ++rep.compared;
  }

  if (!aligned.empty()) rep.frechet_dist = discrete_frechet(aligned, matched, grid);
  return rep;
}

InvarianceReport verify_invariance(const Trajectory& traj, double delta_sing) {
  if (traj.indicator.empty())
    throw std::invalid_argument("verify_invariance: empty trajectory");
  InvarianceReport rep;
  rep.delta_sing = delta_sing;
  rep.applicable = classify(traj.indicator.front(), delta_sing) == NodeClass::Singular;
  rep.min_indicator =
      *std::min_element(traj.indicator.begin(), traj.indicator.end());
  rep.pass = !rep.applicable || rep.min_indicator >= 0.5 * delta_sing;
  return rep;
}

UniquenessReport uniqueness_probe(const ScalarField& u, const MagneticSystem& sys,
                                  double c, const Vec2& x0, double T, double step,
                                  const std::vector<FlowPerturbation>& perturbations,
                                  double c_u, const FlowOptions& opt) {
  if (perturbations.empty())
    throw std::invalid_argument("uniqueness_probe: no perturbations given");
  const PeriodicGrid& grid = sys.grid;

  std::vector<Trajectory> runs;
  double m_min = std::numeric_limits<double>::infinity();
  for (const auto& pert : perturbations) {
    FlowOptions local = opt;
    if (pert.fan_radius > 0.0) local.subdiff.radius = pert.fan_radius;
    MomentumSource src{&u, &sys, c, local.subdiff, pert.driver};
    runs.push_back(integrate_core(u, sys, c, x0, T, step, false, src, local));
    if (pert.driver != nullptr && pert.m > 0.0) m_min = std::min(m_min, pert.m);
  }

  UniquenessReport rep;
  rep.runs = runs.size();
  rep.c_u = c_u;
  const double mterm = std::isfinite(m_min) ? 1.0 / m_min : 0.0;
  rep.bound = c_u * (mterm + grid.h() + step);
  rep.all_completed = true;
  for (const auto& r : runs)
    if (r.status != FlowStatus::Completed) rep.all_completed = false;

  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      const std::size_t len = std::min(runs[a].points.size(), runs[b].points.size());
      for (std::size_t k = 0; k < len; ++k)
        rep.max_pairwise = std::max(
            rep.max_pairwise, grid.torus_dist(runs[a].points[k], runs[b].points[k]));
    }
  rep.pass = rep.all_completed && rep.max_pairwise <= rep.bound;
  return rep;
}

double discrete_frechet(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                        const PeriodicGrid& grid) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("discrete_frechet: empty polyline");
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> prev(nb), cur(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const double d = grid.torus_dist(a[0], b[j]);
    prev[j] = j == 0 ? d : std::max(prev[j - 1], d);
  }
  for (std::size_t i = 1; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = grid.torus_dist(a[i], b[j]);
      double reach;
      if (j == 0) {
        reach = prev[0];
      } else {
        reach = std::min({prev[j], prev[j - 1], cur[j - 1]});
      }
      cur[j] = std::max(reach, d);
    }
    std::swap(prev, cur);
  }
  return prev[nb - 1];
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,x,y,indicator,p_sharp_norm\n";
  for (std::size_t k = 0; k < traj.points.size(); ++k)
    out << fmt17(traj.times[k]) << "," << fmt17(traj.points[k][0]) << ","
        << fmt17(traj.points[k][1]) << "," << fmt17(traj.indicator[k]) << ","
        << fmt17(norm(traj.p_sharp[k])) << "\n";
}

}  // namespace wkam
