#include "wkam/hj_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "wkam/geometry.hpp"

namespace wkam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The per-axis Godunov decomposition needs a diagonal dual metric.
void require_diagonal(const MetricField& g, const char* who) {
  for (std::size_t id = 0; id < g.grid().size(); ++id) {
    if (!g.valid_at(id)) continue;
    const Mat2 m = g.at(id);
    if (std::abs(m.a12) > 1e-12 * (std::abs(m.a11) + std::abs(m.a22)))
      throw std::invalid_argument(std::string(who) + ": metric must be diagonal at every node");
  }
}

// Solve sum_i d_i ((u - psi_i)^+ / h)^2 = rhs for u, given the effective
// upwind neighbor values psi_i (inf when unavailable).
double godunov_solve(int dim, double psi0, double psi1, double d0, double d1, double rhs,
                     double h) {
  if (rhs < 0.0) rhs = 0.0;
  if (dim == 1 || psi1 == kInf) {
    if (psi0 == kInf) return kInf;
    return psi0 + h * std::sqrt(rhs / d0);
  }
  if (psi0 == kInf) return psi1 + h * std::sqrt(rhs / d1);
  const double pa = std::min(psi0, psi1);
  const double pb = std::max(psi0, psi1);
  const double da = (psi0 <= psi1) ? d0 : d1;
  const double ua = pa + h * std::sqrt(rhs / da);
  if (ua <= pb) return ua;  // only the smaller-psi axis is active
  const double a = d0 + d1;
  const double b = -2.0 * (d0 * psi0 + d1 * psi1);
  const double c = d0 * psi0 * psi0 + d1 * psi1 * psi1 - rhs * h * h;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return ua;  // degenerate; fall back to the one-sided value
  return (-b + std::sqrt(disc)) / (2.0 * a);
}

struct NodeGeom {
  double d0 = 1.0, d1 = 1.0;  // diagonal dual metric entries
  double w0 = 0.0, w1 = 0.0;  // omega components
  double v = 0.0;             // potential
};

std::vector<NodeGeom> collect_geometry(const MagneticSystem& sys) {
  std::vector<NodeGeom> out(sys.grid.size());
  for (std::size_t id = 0; id < sys.grid.size(); ++id) {
    const Mat2 dual = sys.g.dual_at(id);
    out[id] = {dual.a11, dual.a22, sys.omega.comp(0, id), sys.omega.comp(1, id), sys.V.at(id)};
  }
  return out;
}

// Effective upwind neighbor value along one axis for |Du + omega|: shifting
// the neighbors by h omega turns the magnetic term into a plain eikonal
// comparison while keeping the scheme monotone.
inline double effective_psi(const std::vector<double>& u, const PeriodicGrid& grid,
                            const std::vector<std::uint8_t>& usable, int axis,
                            const std::array<int, 2>& c, double w, double h) {
  std::size_t idm, idp;
  if (axis == 0) {
    idm = grid.id(c[0] - 1, c[1]);
    idp = grid.id(c[0] + 1, c[1]);
  } else {
    idm = grid.id(c[0], c[1] - 1);
    idp = grid.id(c[0], c[1] + 1);
  }
  const double um = usable.empty() || usable[idm] ? u[idm] : kInf;
  const double up = usable.empty() || usable[idp] ? u[idp] : kInf;
  return std::min(um - h * w, up + h * w);
}

// Best coordinate-loop lower bound on c. A loop with form integral C1,
// half metric integral C2 and mean potential Vbar, traversed at the optimal
// constant speed, certifies c >= C1^2/(4 C2) + Vbar. The constant curve at a
// max-V point certifies c >= 0.
double best_loop_bound(const MagneticSystem& sys) {
  double best = 0.0;
  const int rows = (sys.grid.dim() == 2) ? sys.grid.n() : 1;
  for (int axis = 0; axis < sys.grid.dim(); ++axis) {
    for (int t = 0; t < rows; ++t) {
      const LoopIntegrals li = loop_integrals(sys.omega, sys.g, axis, t);
      double vbar = 0.0;
      for (int s = 0; s < sys.grid.n(); ++s) {
        const std::size_t id = (axis == 0) ? sys.grid.id(s, t) : sys.grid.id(t, s);
        vbar += sys.V.at(id);
      }
      vbar *= sys.grid.h();
      best = std::max(best, li.bound() + vbar);
    }
  }
  return best;
}

struct SweepOrder {
  bool rev0, rev1;
};
constexpr SweepOrder kOrders2[2] = {{false, false}, {true, true}};
constexpr SweepOrder kOrders4[4] = {{false, false}, {true, true}, {false, true}, {true, false}};

}  // namespace

ResidualStats hj_residual(const ScalarField& u, const MagneticSystem& sys, double c) {
  if (!u.grid().same_shape(sys.grid))
    throw std::invalid_argument("hj_residual: field grid does not match system grid");
  const double h = sys.grid.h();
  const int dim = sys.grid.dim();
  ResidualStats st;
  double sq = 0.0;
  for (std::size_t id = 0; id < sys.grid.size(); ++id) {
    Vec2 bwd, fwd;
    u.gradient_one_sided(id, bwd, fwd);
    bool smooth = true;
    for (int a = 0; a < dim; ++a)
      if (std::abs(fwd[a] - bwd[a]) > 5.0 * h) smooth = false;
    if (!smooth) continue;
    const double r = std::abs(sys.hamiltonian_node(id, u.gradient_central(id)) - c);
    st.max_abs = std::max(st.max_abs, r);
    sq += r * r;
    ++st.nodes_used;
  }
  st.l2 = st.nodes_used ? std::sqrt(sq / static_cast<double>(st.nodes_used)) : 0.0;
  return st;
}

CriticalValueEstimate estimate_critical_value(const MagneticSystem& sys,
                                              const CriticalValueOptions& opt) {
  if (opt.lambdas.size() < 2)
    throw std::invalid_argument("estimate_critical_value: need at least two discount rungs");
  for (std::size_t k = 0; k < opt.lambdas.size(); ++k) {
    if (opt.lambdas[k] < 1e-4)
      throw std::invalid_argument("estimate_critical_value: discount rungs must be >= 1e-4");
    if (k > 0 && opt.lambdas[k] >= opt.lambdas[k - 1])
      throw std::invalid_argument("estimate_critical_value: discount ladder must strictly decrease");
  }
  if (opt.radii < 2 || opt.directions < 2)
    throw std::invalid_argument("estimate_critical_value: need at least 2 radii and directions");

  const PeriodicGrid& grid = sys.grid;
  const int dim = grid.dim();
  const double h = grid.h();
  const std::vector<NodeGeom> geo = collect_geometry(sys);

  // A-priori speed scale from the largest possible critical level H(x,0).
  double c_ub = -kInf, vmin = kInf;
  for (std::size_t id = 0; id < grid.size(); ++id) {
    c_ub = std::max(c_ub, sys.hamiltonian_node(id, {0.0, 0.0}));
    vmin = std::min(vmin, geo[id].v);
  }
  const double vmax = 1.25 * std::sqrt(std::max(2.0 * (c_ub - vmin), 1e-8)) + 1e-8;

  const int ndir = (dim == 1) ? 2 : opt.directions;
  std::vector<Vec2> dirs(ndir);
  if (dim == 1) {
    dirs[0] = {1.0, 0.0};
    dirs[1] = {-1.0, 0.0};
  } else {
    for (int k = 0; k < ndir; ++k) {
      const double th = 2.0 * std::numbers::pi * k / ndir;
      dirs[k] = {std::cos(th), std::sin(th)};
    }
  }
  // Per node and direction: L(x, s d) = A s^2 - B s - V.
  std::vector<double> A(grid.size() * ndir), B(grid.size() * ndir);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const Mat2 gm = sys.g.at(id);
    for (int k = 0; k < ndir; ++k) {
      A[id * ndir + k] = 0.5 * gm.quad(dirs[k]);
      B[id * ndir + k] = geo[id].w0 * dirs[k][0] + geo[id].w1 * dirs[k][1];
    }
  }
  std::vector<double> radii(opt.radii);
  for (int j = 0; j < opt.radii; ++j) radii[j] = vmax * (j + 1) / static_cast<double>(opt.radii);

  CriticalValueEstimate est{0.0, 0.0, {}, 0, ScalarField(grid)};
  ScalarField field(grid);                 // current iterate; interpolation view
  std::vector<double>& u = field.data();   // same storage

  const SweepOrder* orders = (dim == 1) ? kOrders2 : kOrders4;
  const int norders = (dim == 1) ? 2 : 4;
  std::vector<double> vals(opt.radii);

  for (std::size_t rung = 0; rung < opt.lambdas.size(); ++rung) {
    const double lam = opt.lambdas[rung];
    if (rung > 0) {
      const double scale = opt.lambdas[rung - 1] / lam;
      for (double& x : u) x *= scale;
    }
    const double dt = opt.cfl * h / vmax;
    const double keep = 1.0 - lam * dt;

    // Semi-Lagrangian relaxation of one node against the field `src`.
    auto node_update = [&](std::size_t id, const ScalarField& src) {
      const Vec2 x = grid.point(id);
      const double cv = geo[id].v;
      const double stay = dt * (-cv) + keep * src.at(id);
      double best = stay;
      for (int k = 0; k < ndir; ++k) {
        const double a = A[id * ndir + k];
        const double b = B[id * ndir + k];
        const Vec2 d = dirs[k];
        auto eval = [&](double s) {
          const Vec2 foot{x[0] - dt * s * d[0], x[1] - dt * s * d[1]};
          return dt * (a * s * s - b * s - cv) + keep * src.interp(foot);
        };
        int bj = 0;
        for (int j = 0; j < opt.radii; ++j) {
          vals[j] = eval(radii[j]);
          if (vals[j] < vals[bj]) bj = j;
        }
        best = std::min(best, vals[bj]);
        // Parabolic polish around the best radius; L is quadratic in s, so
        // the fit is near-exact wherever the interpolated term is linear.
        if (bj + 1 < opt.radii) {
          const double s0 = (bj == 0) ? 0.0 : radii[bj - 1];
          const double s1 = radii[bj];
          const double s2 = radii[bj + 1];
          const double f0 = (bj == 0) ? stay : vals[bj - 1];
          const double f1 = vals[bj];
          const double f2 = vals[bj + 1];
          const double denom = (s1 - s0) * (f2 - f0) - (s2 - s0) * (f1 - f0);
          if (std::abs(denom) > 1e-300) {
            double sstar =
                0.5 * ((s1 * s1 - s0 * s0) * (f2 - f0) - (s2 * s2 - s0 * s0) * (f1 - f0)) / denom;
            sstar = std::clamp(sstar, s0, s2);
            best = std::min(best, eval(sstar));
          }
        }
      }
      return best;
    };

    int sweeps = 0;
    // Alternating sweep orders have slightly different fixed points, so the
    // per-sweep change floors out at their gap. Convergence is judged one
    // full order cycle apart, where that orbit cancels.
    std::vector<std::vector<double>> ring(norders, u);
    std::vector<double> hist;
    bool converged = false;
    while (sweeps < opt.max_sweeps) {
      std::vector<double>& prev = ring[sweeps % norders];
      const SweepOrder ord = orders[sweeps % norders];
      for (int ii = 0; ii < grid.n(); ++ii) {
        const int i = ord.rev0 ? grid.n() - 1 - ii : ii;
        if (dim == 1) {
          const std::size_t id = grid.id(i, 0);
          u[id] = node_update(id, field);
        } else {
          for (int jj = 0; jj < grid.n(); ++jj) {
            const int j = ord.rev1 ? grid.n() - 1 - jj : jj;
            const std::size_t id = grid.id(i, j);
            u[id] = node_update(id, field);
          }
        }
      }
      double drift = 0.0;
      for (std::size_t id = 0; id < grid.size(); ++id) drift += u[id] - prev[id];
      drift /= static_cast<double>(grid.size());
      double shape_change = 0.0;
      for (std::size_t id = 0; id < grid.size(); ++id)
        shape_change = std::max(shape_change, std::abs(u[id] - prev[id] - drift));
      prev = u;
      hist.push_back(shape_change);
      ++sweeps;
      if (sweeps >= norders && shape_change < opt.shape_tol) {
        converged = true;
        break;
      }
    }
    est.iterations += sweeps;
    if (!converged) {
      std::ostringstream os;
      os << "estimate_critical_value: rung lambda=" << lam << " did not converge in "
         << opt.max_sweeps << " sweeps; last shape changes:";
      for (std::size_t k = hist.size() > 6 ? hist.size() - 6 : 0; k < hist.size(); ++k)
        os << " " << hist[k];
      throw std::runtime_error(os.str());
    }

    // The converged shape sits a constant off the fixed point; one Jacobi
    // application drifts by (lam dt) times that constant, which recovers
    // c_lam = -lam mean(u*) exactly.
    const ScalarField frozen = field;
    std::vector<double> jac(grid.size());
    for (std::size_t id = 0; id < grid.size(); ++id) jac[id] = node_update(id, frozen);
    double drift = 0.0, mean_u = 0.0;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      drift += jac[id] - u[id];
      mean_u += u[id];
    }
    drift /= static_cast<double>(grid.size());
    mean_u /= static_cast<double>(grid.size());
    est.rungs.emplace_back(lam, -lam * mean_u - drift / dt);
    u = std::move(jac);
  }

  const auto& r = est.rungs;
  const double l1 = r[r.size() - 2].first, c1 = r[r.size() - 2].second;
  const double l2 = r.back().first, c2 = r.back().second;
  est.c = c2 + (c2 - c1) * l2 / (l1 - l2);

  double mean_u = 0.0;
  for (double x : u) mean_u += x;
  mean_u /= static_cast<double>(grid.size());
  for (std::size_t id = 0; id < grid.size(); ++id) est.shape.at(id) = u[id] - mean_u;

  est.loop_bound = best_loop_bound(sys);
  if (est.c < est.loop_bound - opt.bound_tol) {
    std::ostringstream os;
    os << "estimate_critical_value: estimate " << est.c << " violates the loop lower bound "
       << est.loop_bound << " beyond tolerance " << opt.bound_tol;
    throw std::runtime_error(os.str());
  }
  return est;
}

WeakKamField solve_critical(const MagneticSystem& sys, double c, const SolveOptions& opt) {
  require_diagonal(sys.g, "solve_critical");
  const PeriodicGrid& grid = sys.grid;
  const int dim = grid.dim();
  const double h = grid.h();
  const std::vector<NodeGeom> geo = collect_geometry(sys);

  // rhs r2 = 2(c - V) >= 0 on W; nodes below are excluded and reported.
  std::vector<double> r2(grid.size());
  std::vector<std::uint8_t> included(grid.size(), 1);
  std::size_t excluded = 0;
  double vmax = 0.0;
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const double gap = 2.0 * (c - geo[id].v);
    if (gap < -1e-10) {
      included[id] = 0;
      ++excluded;
      r2[id] = 0.0;
      continue;
    }
    r2[id] = std::max(gap, 0.0);
    vmax = std::max(vmax, std::sqrt(std::max(geo[id].d0, geo[id].d1) * r2[id]));
  }
  if (excluded == grid.size())
    throw std::invalid_argument("solve_critical: 2(c - V) < 0 everywhere; W is empty");
  vmax = std::max(vmax, 1e-8);
  const double dt = opt.cfl * h / (vmax * dim);

  std::vector<double> u(grid.size(), 0.0);
  if (opt.warm_start) {
    if (!opt.warm_start->grid().same_shape(grid))
      throw std::invalid_argument("solve_critical: warm start grid mismatch");
    u = opt.warm_start->data();
  }

  // Godunov numerical Hamiltonian at a node.
  auto flux = [&](const std::vector<double>& src, std::size_t id) {
    const auto cc = grid.coords(id);
    const NodeGeom& ng = geo[id];
    const double p0 = effective_psi(src, grid, included, 0, cc, ng.w0, h);
    const double q0 = std::max((src[id] - p0) / h, 0.0);
    double s = ng.d0 * q0 * q0;
    if (dim == 2) {
      const double p1 = effective_psi(src, grid, included, 1, cc, ng.w1, h);
      const double q1 = std::max((src[id] - p1) / h, 0.0);
      s += ng.d1 * q1 * q1;
    }
    return 0.5 * s + ng.v;
  };

  // Explicit marching with mean renormalization: steady shapes of
  // du/dt = -(H(x, Du) - c) are the weak KAM solutions.
  std::vector<double> unew(grid.size());
  int steps = 0;
  std::vector<double> hist;
  bool converged = false;
  double last_delta = kInf;
  const double nincl = static_cast<double>(grid.size() - excluded);
  while (steps < opt.max_steps) {
    double mean_shift = 0.0;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      if (!included[id]) {
        unew[id] = u[id];
        continue;
      }
      unew[id] = u[id] - dt * (flux(u, id) - c);
      mean_shift += unew[id] - u[id];
    }
    mean_shift /= nincl;
    double delta = 0.0;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      if (!included[id]) continue;
      unew[id] -= mean_shift;
      delta = std::max(delta, std::abs(unew[id] - u[id]));
    }
    u.swap(unew);
    ++steps;
    last_delta = delta;
    if ((steps & 1023) == 0) hist.push_back(delta);
    if (delta < opt.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "solve_critical: no steady state after " << steps << " steps; sampled step deltas:";
    for (std::size_t k = hist.size() > 6 ? hist.size() - 6 : 0; k < hist.size(); ++k)
      os << " " << hist[k];
    os << " last=" << last_delta;
    throw std::runtime_error(os.str());
  }

  // Normalize min u = 0 over the included region.
  double umin = kInf;
  for (std::size_t id = 0; id < grid.size(); ++id)
    if (included[id]) umin = std::min(umin, u[id]);
  for (std::size_t id = 0; id < grid.size(); ++id) u[id] = included[id] ? u[id] - umin : 0.0;

  WeakKamField out{ScalarField(grid, std::move(u)),
                   c,
                   0.0,
                   0.0,
                   0,
                   excluded,
                   steps,
                   "godunov-marching"};
  const ResidualStats st = hj_residual(out.u, sys, c);
  out.residual_max = st.max_abs;
  out.residual_l2 = st.l2;
  out.residual_nodes = st.nodes_used;
  return out;
}

ScalarField eikonal_distance(const MetricField& g, const std::vector<std::size_t>& sources) {
  if (sources.empty()) throw std::invalid_argument("eikonal_distance: empty source set");
  require_diagonal(g, "eikonal_distance");
  const PeriodicGrid& grid = g.grid();
  const int dim = grid.dim();
  const double h = grid.h();

  std::vector<double> val(grid.size(), kInf);
  std::vector<std::uint8_t> finalized(grid.size(), 0);
  const std::vector<std::uint8_t> no_mask;

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  if (g.kind() == MetricKind::Flat) {
    // Exact initialization in a disk around each source keeps the point
    // source rarefaction out of the O(h) error budget.
    const double r0 = std::max(0.12, 6.0 * h);
    const Mat2 gm = g.at(0);
    const int ky_lo = (dim == 2) ? -1 : 0;
    const int ky_hi = (dim == 2) ? 1 : 0;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      const Vec2 x = grid.point(id);
      double best = kInf;
      for (std::size_t s : sources) {
        const Vec2 y = grid.point(s);
        for (int kx = -1; kx <= 1; ++kx)
          for (int ky = ky_lo; ky <= ky_hi; ++ky) {
            const Vec2 d{x[0] - y[0] + kx, (dim == 2) ? x[1] - y[1] + ky : 0.0};
            best = std::min(best, std::sqrt(gm.quad(d)));
          }
      }
      if (best <= r0) {
        val[id] = best;
        heap.emplace(best, id);
      }
    }
  } else {
    for (std::size_t s : sources) {
      val[s] = 0.0;
      heap.emplace(0.0, s);
    }
  }

  auto relax = [&](std::size_t id) {
    const auto cc = grid.coords(id);
    const Mat2 dual = g.dual_at(id);
    auto nb = [&](int axis, int sgn) {
      const std::size_t nid =
          (axis == 0) ? grid.id(cc[0] + sgn, cc[1]) : grid.id(cc[0], cc[1] + sgn);
      return finalized[nid] ? val[nid] : kInf;
    };
    const double psi0 = std::min(nb(0, -1), nb(0, +1));
    const double psi1 = (dim == 2) ? std::min(nb(1, -1), nb(1, +1)) : kInf;
    return godunov_solve(dim, psi0, psi1, dual.a11, dual.a22, 1.0, h);
  };

  while (!heap.empty()) {
    const auto [v, id] = heap.top();
    heap.pop();
    if (finalized[id] || v > val[id]) continue;
    finalized[id] = 1;
    const auto cc = grid.coords(id);
    for (int k = 0; k < 2 * dim; ++k) {
      const int axis = k / 2;
      const int sgn = (k % 2) ? 1 : -1;
      const std::size_t nid =
          (axis == 0) ? grid.id(cc[0] + sgn, cc[1]) : grid.id(cc[0], cc[1] + sgn);
      if (finalized[nid]) continue;
      const double cand = relax(nid);
      if (cand < val[nid]) {
        val[nid] = cand;
        heap.emplace(cand, nid);
      }
    }
  }
  return ScalarField(grid, std::move(val));
}

}  // namespace wkam
