#include "wkam/oracle.hpp"

#include "wkam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace wkam::oracle {

namespace {

constexpr double kPi = std::numbers::pi;

// 4-point Gauss-Legendre nodes and weights on [0, 1].
constexpr double kGaussX[4] = {0.069431844202973712, 0.33000947820757187,
                               0.66999052179242813, 0.93056815579702629};
constexpr double kGaussW[4] = {0.17392742256872693, 0.32607257743127307,
                               0.32607257743127307, 0.17392742256872693};

}  // namespace

double Pendulum1D::potential(double x) { return std::cos(2.0 * kPi * x) - 1.0; }

double Pendulum1D::u(double x) {
  const double xw = PeriodicGrid::wrap_unit(x);
  if (xw <= 0.5) return (2.0 / kPi) * (1.0 - std::cos(kPi * xw));
  return (2.0 / kPi) * (1.0 + std::cos(kPi * xw));
}

std::pair<double, double> Pendulum1D::u_branches(double x) {
  const double xw = PeriodicGrid::wrap_unit(x);
  const double up = 2.0 * std::sin(kPi * xw);    // derivative of the rising branch
  const double dn = -2.0 * std::sin(kPi * xw);   // derivative of the falling branch
  if (std::abs(xw - 0.5) < 1e-12) return {up, dn};
  if (xw < 0.5) return {up, up};
  return {dn, dn};
}

MagneticSystem Pendulum1D::system(int n) {
  PeriodicGrid grid(1, n);
  ScalarField v(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) v.at(id) = potential(grid.point(id)[0]);
  return MagneticSystem(grid, MetricField::flat(grid), OneFormField::constant(grid, {0.0, 0.0}),
                        PotentialField(std::move(v)));
}

ScalarField Pendulum1D::sample_u(const PeriodicGrid& grid) {
  ScalarField f(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) f.at(id) = u(grid.point(id)[0]);
  return f;
}

double Magnetic1D::loop_bound() const {
  const MagneticSystem sys = system(64);
  const LoopIntegrals li = loop_integrals(sys.omega, sys.g, 0);
  const double bound = li.bound();
  if (std::abs(bound - critical_value()) > 1e-12)
    throw std::logic_error("magnetic 1D loop bound does not match the closed form");
  return bound;
}

MagneticSystem Magnetic1D::system(int n) const {
  PeriodicGrid grid(1, n);
  ScalarField v(grid);  // zeros
  return MagneticSystem(grid, MetricField::flat(grid), OneFormField::constant(grid, {a, 0.0}),
                        PotentialField(std::move(v)));
}

double TorusDistance::value(const Vec2& x) const {
  const Vec2 xw = PeriodicGrid::wrap_point(x, 2);
  const Vec2 x0w = PeriodicGrid::wrap_point(x0, 2);
  double best = std::numeric_limits<double>::infinity();
  for (int kx = -1; kx <= 1; ++kx)
    for (int ky = -1; ky <= 1; ++ky) {
      const Vec2 d{xw[0] - x0w[0] + kx, xw[1] - x0w[1] + ky};
      best = std::min(best, norm(d));
    }
  return best;
}

std::vector<Vec2> TorusDistance::gradient_branches(const Vec2& x, double tie_tol) const {
  const Vec2 xw = PeriodicGrid::wrap_point(x, 2);
  const Vec2 x0w = PeriodicGrid::wrap_point(x0, 2);
  const double dmin = value(x);
  std::vector<Vec2> out;
  if (dmin < 1e-12) return out;
  for (int kx = -1; kx <= 1; ++kx)
    for (int ky = -1; ky <= 1; ++ky) {
      const Vec2 d{xw[0] - x0w[0] + kx, xw[1] - x0w[1] + ky};
      const double len = norm(d);
      if (len <= dmin + tie_tol) out.push_back(d * (1.0 / len));
    }
  return out;
}

ScalarField TorusDistance::sample(const PeriodicGrid& grid) const {
  if (grid.dim() != 2) throw std::invalid_argument("torus distance oracle needs a 2D grid");
  ScalarField f(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) f.at(id) = value(grid.point(id));
  return f;
}

TorusDistance::CutLines TorusDistance::cut_locus() const {
  return {PeriodicGrid::wrap_unit(x0[0] + 0.5), PeriodicGrid::wrap_unit(x0[1] + 0.5)};
}

bool TorusDistance::on_cut(const Vec2& x, double tol) const {
  const CutLines cl = cut_locus();
  return std::abs(PeriodicGrid::torus_delta(x[0], cl.xline)) <= tol ||
         std::abs(PeriodicGrid::torus_delta(x[1], cl.yline)) <= tol;
}

MagneticSystem TorusDistance::eikonal_system(int n) {
  PeriodicGrid grid(2, n);
  ScalarField v(grid);  // zeros
  return MagneticSystem(grid, MetricField::flat(grid), OneFormField::constant(grid, {0.0, 0.0}),
                        PotentialField(std::move(v)));
}

double path_action(const MagneticSystem& sys, const std::vector<Vec2>& lifted, double T) {
  if (lifted.size() < 2) throw std::invalid_argument("path_action: need at least 2 vertices");
  if (!(T > 0.0)) throw std::invalid_argument("path_action: T must be positive");
  const std::size_t S = lifted.size() - 1;
  const double dt = T / static_cast<double>(S);
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    const Vec2 a = lifted[s];
    const Vec2 d = lifted[s + 1] - a;
    const Vec2 vel = d * (1.0 / dt);
    double seg = 0.0;
    for (int q = 0; q < 4; ++q) {
      const Vec2 x = PeriodicGrid::wrap_point(a + d * kGaussX[q], sys.grid.dim());
      seg += kGaussW[q] * sys.lagrangian(x, vel);
    }
    total += dt * seg;
  }
  return total;
}

namespace {

// Action of one segment of the lifted path; shared by the descent loop.
double segment_action(const MagneticSystem& sys, const Vec2& a, const Vec2& b, double dt) {
  const Vec2 d = b - a;
  const Vec2 vel = d * (1.0 / dt);
  double seg = 0.0;
  for (int q = 0; q < 4; ++q) {
    const Vec2 x = PeriodicGrid::wrap_point(a + d * kGaussX[q], sys.grid.dim());
    seg += kGaussW[q] * sys.lagrangian(x, vel);
  }
  return dt * seg;
}

// Golden-section minimization of f on [lo, hi]; returns the argmin.
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters; ++k) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

double descend_path(const MagneticSystem& sys, std::vector<Vec2>& verts, double T) {
  const std::size_t S = verts.size() - 1;
  const double dt = T / static_cast<double>(S);
  std::vector<double> sa(S);
  for (std::size_t s = 0; s < S; ++s) sa[s] = segment_action(sys, verts[s], verts[s + 1], dt);
  double total = 0.0;
  for (double v : sa) total += v;

  for (int pass = 0; pass < 14; ++pass) {
    const double radius = std::max(0.7 * std::pow(0.5, pass), 0.02);
    const double before = total;
    for (std::size_t i = 1; i < S; ++i) {
      for (int axis = 0; axis < sys.grid.dim(); ++axis) {
        const double center = verts[i][axis];
        auto eval = [&](double coord) {
          Vec2 v = verts[i];
          v[axis] = coord;
          return segment_action(sys, verts[i - 1], v, dt) + segment_action(sys, v, verts[i + 1], dt);
        };
        const double cur = sa[i - 1] + sa[i];
        const double best = golden_min(eval, center - radius, center + radius, 20);
        const double fbest = eval(best);
        if (fbest < cur - 1e-14) {
          verts[i][axis] = best;
          sa[i - 1] = segment_action(sys, verts[i - 1], verts[i], dt);
          sa[i] = segment_action(sys, verts[i], verts[i + 1], dt);
          total += fbest - cur;
        }
      }
    }
    if (before - total < 1e-11) break;
  }
  return total;
}

}  // namespace

double brute_force_action(const MagneticSystem& sys, const Vec2& x, const Vec2& y, double T,
                          const BruteForceOptions& opt) {
  if (opt.segments < 2 || opt.segments > 64)
    throw std::invalid_argument("brute_force_action: segments must be in [2, 64]");
  if (!(T > 0.0)) throw std::invalid_argument("brute_force_action: T must be positive");
  const int dim = sys.grid.dim();
  const Vec2 x0 = PeriodicGrid::wrap_point(x, dim);
  const Vec2 y0 = PeriodicGrid::wrap_point(y, dim);

  std::vector<Vec2> windings;
  const int kw = opt.max_winding;
  if (dim == 1) {
    for (int kx = -kw; kx <= kw; ++kx) windings.push_back({static_cast<double>(kx), 0.0});
  } else {
    for (int kx = -kw; kx <= kw; ++kx)
      for (int ky = -kw; ky <= kw; ++ky)
        windings.push_back({static_cast<double>(kx), static_cast<double>(ky)});
  }
  const int runs_per_winding =
      std::max(1, opt.restarts / static_cast<int>(windings.size()));

  const std::size_t S = static_cast<std::size_t>(opt.segments);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < windings.size(); ++w) {
    const Vec2 yk = y0 + windings[w];
    for (int run = 0; run < runs_per_winding; ++run) {
      std::mt19937_64 rng(opt.seed ^ (0x9e3779b97f4a7c15ULL * (w * 1000 + run + 1)));
      std::uniform_real_distribution<double> noise(-0.25, 0.25);
      std::vector<Vec2> verts(S + 1);
      for (std::size_t s = 0; s <= S; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(S);
        Vec2 v = x0 * (1.0 - t) + yk * t;
        if (run > 0 && s > 0 && s < S)
          for (int a = 0; a < dim; ++a) v[a] += noise(rng);
        verts[s] = v;
      }
      best = std::min(best, descend_path(sys, verts, T));
    }
  }
  return best;
}

MagneticCritical magnetic_critical(double a) {
  Magnetic1D m{a};
  return {m.critical_value(), m.loop_bound()};
}

}  // namespace wkam::oracle
