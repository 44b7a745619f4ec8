#include "wkam/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "wkam/geometry.hpp"

namespace wkam {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct KernelTap {
  int di, dj;
  double w;
};

// Radial bump exp(-1/(1 - s^2)) on s = |delta| m < 1, renormalized so the
// taps sum to one; convolving a constant then reproduces it exactly.
std::vector<KernelTap> bump_taps(int m, const PeriodicGrid& grid) {
  const double h = grid.h();
  const double radius = 1.0 / m;
  const int reach = static_cast<int>(std::floor(radius / h)) + 1;
  std::vector<KernelTap> taps;
  double total = 0.0;
  const int jlo = grid.dim() == 2 ? -reach : 0;
  const int jhi = grid.dim() == 2 ? reach : 0;
  for (int di = -reach; di <= reach; ++di)
    for (int dj = jlo; dj <= jhi; ++dj) {
      const double s2 = (static_cast<double>(di) * di + static_cast<double>(dj) * dj) *
                        h * h / (radius * radius);
      if (s2 >= 1.0) continue;
      const double w = std::exp(-1.0 / (1.0 - s2));
      taps.push_back({di, dj, w});
      total += w;
    }
  for (auto& t : taps) t.w /= total;
  return taps;
}

}  // namespace

bool kernel_resolvable(int m, const PeriodicGrid& grid) {
  return m >= 1 && 2.0 / m >= 3.0 * grid.h() - 1e-12;
}

ScalarField mollify(const ScalarField& u, int m) {
  const auto& grid = u.grid();
  if (!kernel_resolvable(m, grid)) throw std::invalid_argument("kernel under-resolved");
  const auto taps = bump_taps(m, grid);
  ScalarField out(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const auto c = grid.coords(id);
    double acc = 0.0;
    for (const auto& t : taps) acc += t.w * u.at(c[0] + t.di, c[1] + t.dj);
    out.at(id) = acc;
  }
  return out;
}

ComponentField gradient_field(const ScalarField& u) {
  const auto& grid = u.grid();
  ComponentField g(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const Vec2 d = u.gradient_central(id);
    g.set(0, id, d[0]);
    if (grid.dim() == 2) g.set(1, id, d[1]);
  }
  return g;
}

MollifiedFamily build_family(const ScalarField& u, const std::vector<int>& ladder) {
  MollifiedFamily fam;
  fam.ladder = ladder;
  fam.fields.reserve(ladder.size());
  fam.gradients.reserve(ladder.size());
  for (int m : ladder) {
    fam.fields.push_back(mollify(u, m));
    fam.gradients.push_back(gradient_field(fam.fields.back()));
  }
  return fam;
}

Trajectory smooth_flow(const ScalarField& um, const MagneticSystem& sys, FlowMode mode,
                       double c, const Vec2& x0, double T, double step, double eps_f) {
  const auto& grid = um.grid();
  if (!grid.same_shape(sys.grid))
    throw std::invalid_argument("smooth_flow: field grid does not match system grid");
  const double h = grid.h();
  if (!(T > 0.0)) throw std::invalid_argument("smooth_flow: horizon T must be positive");
  if (!(step > 0.0 && step <= 0.5 * h + 1e-15))
    throw std::invalid_argument("smooth_flow: step must lie in (0, h/2]");

  const ComponentField grad = gradient_field(um);
  const EnergyGapField gap(sys, c, eps_f);

  Trajectory traj;
  Vec2 x = grid.wrap_point(x0);
  if (!(gap.interp(x) > eps_f))
    throw std::invalid_argument("flow: start point lies outside W");

  auto velocity = [&](const Vec2& y) {
    const Vec2 p = grad.interp(y);
    Vec2 v = sys.hamiltonian_gradient_p(y, p);
    if (mode == FlowMode::Magnetic) {
      const double f = gap.interp(y);
      v = (1.0 / f) * v;
    }
    return v;
  };
  auto append = [&](double t, const Vec2& y) {
    const Vec2 p = grad.interp(y);
    traj.times.push_back(t);
    traj.points.push_back(y);
    traj.p_sharp.push_back(p);
    traj.indicator.push_back(c - sys.hamiltonian(y, p));
  };

  double t = 0.0;
  append(t, x);
  traj.status = FlowStatus::Completed;
  while (t < T - 1e-15) {
    const double dt = std::min(step, T - t);
    const Vec2 v1 = velocity(x);
    const Vec2 xs = grid.wrap_point(x + dt * v1);
    if (!(gap.interp(xs) > eps_f)) {
      traj.status = FlowStatus::LeftW;
      break;
    }
    const Vec2 v2 = velocity(xs);
    const Vec2 xn = grid.wrap_point(x + (0.5 * dt) * (v1 + v2));
    if (!(gap.interp(xn) > eps_f)) {
      traj.status = FlowStatus::LeftW;
      break;
    }
    t += dt;
    x = xn;
    append(t, x);
  }
  return traj;
}

PsiTrace psi_track(const ScalarField& um, const MagneticSystem& sys, FlowMode mode,
                   double c, const Trajectory& gamma, int m) {
  if (gamma.points.empty()) throw std::invalid_argument("psi_track: empty trajectory");
  const ComponentField grad = gradient_field(um);

  PsiTrace tr;
  tr.m = m;
  tr.slack = 1.0 / m + 5.0 * um.grid().h();
  tr.times = gamma.times;
  tr.psi.reserve(gamma.points.size());
  for (const Vec2& x : gamma.points) {
    const Vec2 p = grad.interp(x);
    if (mode == FlowMode::Riemannian) {
      tr.psi.push_back(sys.g.dual_interp(x).quad(p) - 1.0);
    } else {
      const double f = c - sys.V.interp(x);
      tr.psi.push_back((sys.hamiltonian(x, p) - c) / f);
    }
  }

  // Smallest C >= 0 with psi(t_k) <= exp(-C t_k) psi(0) + slack. For
  // psi(0) < 0 the right side grows with C, so each sample gives a closed-form
  // lower bound on C; for psi(0) >= 0 it shrinks, so only C = 0 can work.
  const double psi0 = tr.psi.front();
  if (psi0 < 0.0) {
    tr.fit_ok = true;
    double cfit = 0.0;
    for (std::size_t k = 1; k < tr.psi.size(); ++k) {
      const double t = tr.times[k];
      if (!(t > 0.0)) continue;
      const double excess = tr.psi[k] - tr.slack;
      if (excess >= 0.0) {
        tr.fit_ok = false;
        cfit = std::numeric_limits<double>::infinity();
        break;
      }
      const double ratio = excess / psi0;  // > 0
      if (ratio < 1.0) cfit = std::max(cfit, -std::log(ratio) / t);
    }
    tr.c_fit = cfit;
  } else {
    tr.c_fit = 0.0;
    tr.fit_ok = true;
    for (std::size_t k = 1; k < tr.psi.size(); ++k)
      if (tr.psi[k] > psi0 + tr.slack) tr.fit_ok = false;
  }
  return tr;
}

namespace {

// 4th-order periodic finite differences of a scalar grid at node (i, j),
// with the stencil spacing scaled by "sp" cells for the stability probe.
struct NodeStencil {
  const ScalarField& u;
  int i, j;
  double h;

  double rd(int di, int dj) const { return u.at(i + di, j + dj); }
  double d1(int axis, int sp) const {
    const int sx = axis == 0 ? sp : 0;
    const int sy = axis == 0 ? 0 : sp;
    const double num =
        8.0 * (rd(sx, sy) - rd(-sx, -sy)) - (rd(2 * sx, 2 * sy) - rd(-2 * sx, -2 * sy));
    return num / (12.0 * h * sp);
  }
  double d2(int axis, int sp) const {
    const int sx = axis == 0 ? sp : 0;
    const int sy = axis == 0 ? 0 : sp;
    const double num = -rd(2 * sx, 2 * sy) + 16.0 * rd(sx, sy) - 30.0 * rd(0, 0) +
                       16.0 * rd(-sx, -sy) - rd(-2 * sx, -2 * sy);
    return num / (12.0 * h * h * sp * sp);
  }
  double dxy(int sp) const {
    // Composition of the two 4th-order first-derivative stencils.
    static const double w[5] = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
    double acc = 0.0;
    for (int a = -2; a <= 2; ++a) {
      if (w[a + 2] == 0.0) continue;
      for (int b = -2; b <= 2; ++b) {
        if (w[b + 2] == 0.0) continue;
        acc += w[a + 2] * w[b + 2] * rd(a * sp, b * sp);
      }
    }
    return acc / (h * h * sp * sp);
  }
};

double unit_uniform(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

}  // namespace

HessianReport hessian_checks(const ScalarField& u, const MagneticSystem& sys, FlowMode mode,
                             double c, int n_samples, const HessianOptions& opt) {
  const auto& grid = u.grid();
  if (!grid.same_shape(sys.grid))
    throw std::invalid_argument("hessian_checks: field grid does not match system grid");
  if (n_samples < 1) throw std::invalid_argument("hessian_checks: sample count must be >= 1");
  const int dim = grid.dim();
  const double h = grid.h();
  const double tol = opt.stencil_tol > 0.0 ? opt.stencil_tol : 10.0 * h;

  // Magnetic mode measures everything in the rescaled metric gt = (c - V) g.
  MetricField metric = sys.g;
  if (mode == FlowMode::Magnetic) {
    ScalarField f(grid);
    for (std::size_t id = 0; id < grid.size(); ++id) f.at(id) = c - sys.V.at(id);
    metric = conformal_rescale(sys.g, f);
  }

  auto vector_x = [&](int i, int j) {
    // X = gt-sharp of omega; zero in Riemannian mode.
    const std::size_t id = grid.id(i, j);
    return metric.dual_at(id).apply(sys.omega.value(id));
  };

  // Usable nodes: value cut, metric valid across the widest stencil, and
  // second differences stable when the stencil spacing doubles.
  std::vector<std::size_t> usable;
  for (std::size_t id = 0; id < grid.size(); ++id) {
    if (u.at(id) < opt.min_value) continue;
    const auto cc = grid.coords(id);
    if (metric.invalid_count() > 0) {
      bool ok = true;
      for (int di = -4; di <= 4 && ok; ++di)
        for (int dj = (dim == 2 ? -4 : 0); dj <= (dim == 2 ? 4 : 0) && ok; ++dj)
          if (!metric.valid_at(grid.id(cc[0] + di, cc[1] + dj))) ok = false;
      if (!ok) continue;
    }
    const NodeStencil st{u, cc[0], cc[1], h};
    double drift = std::abs(st.d2(0, 1) - st.d2(0, 2));
    if (dim == 2) {
      drift = std::max(drift, std::abs(st.d2(1, 1) - st.d2(1, 2)));
      drift = std::max(drift, std::abs(st.dxy(1) - st.dxy(2)));
    }
    if (drift <= tol) usable.push_back(id);
  }

  HessianReport rep;
  rep.mode = mode;
  rep.requested = n_samples;
  rep.usable = static_cast<int>(usable.size());
  rep.warn = rep.usable < (n_samples + 1) / 2;

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> picks;
  if (rep.usable <= n_samples) {
    picks = usable;
  } else {
    // Partial Fisher-Yates; modulo bias is irrelevant at these sizes.
    picks.reserve(n_samples);
    std::vector<std::size_t> pool = usable;
    for (int k = 0; k < n_samples; ++k) {
      const std::size_t r = k + rng() % (pool.size() - k);
      std::swap(pool[k], pool[r]);
      picks.push_back(pool[k]);
    }
  }

  const int n_xi = opt.xi_per_point > 0 ? opt.xi_per_point : n_samples;
  const double two_pi = 6.283185307179586476925286766559;

  for (const std::size_t id : picks) {
    const auto cc = grid.coords(id);
    const NodeStencil st{u, cc[0], cc[1], h};

    Vec2 du{st.d1(0, 1), dim == 2 ? st.d1(1, 1) : 0.0};
    double hess[2][2] = {};
    hess[0][0] = st.d2(0, 1);
    if (dim == 2) {
      hess[1][1] = st.d2(1, 1);
      hess[0][1] = hess[1][0] = st.dxy(1);
    }

    const Christoffel gam = christoffel(metric, id);
    double tten[2][2] = {};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double s = hess[i][j];
        for (int k = 0; k < dim; ++k) s -= gam.k[k][i][j] * du[k];
        tten[i][j] = s;
      }

    Vec2 q = du;  // covector entering the flow direction and the pairings
    if (mode == FlowMode::Magnetic) {
      q = q + sys.omega.value(id);
      // Lowered covariant derivative of X: (nabla X)_{ij} = gt_{jk} (d_i X^k
      // + Gamma^k_{il} X^l), 4th-order differences of the sharped form.
      const Vec2 xc = vector_x(cc[0], cc[1]);
      double dx[2][2] = {};  // dx[i][k] = d_i X^k
      static const double w[5] = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
      for (int i = 0; i < dim; ++i)
        for (int a = -2; a <= 2; ++a) {
          if (w[a + 2] == 0.0) continue;
          const Vec2 xa = i == 0 ? vector_x(cc[0] + a, cc[1]) : vector_x(cc[0], cc[1] + a);
          dx[i][0] += w[a + 2] * xa[0];
          dx[i][1] += w[a + 2] * xa[1];
        }
      const Mat2 gt = metric.at(id);
      const double gl[2][2] = {{gt.a11, gt.a12}, {gt.a12, gt.a22}};
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          double s = 0.0;
          for (int k = 0; k < dim; ++k) {
            double cov = dx[i][k] / h;
            for (int l = 0; l < dim; ++l) cov += gam.k[k][i][l] * xc[l];
            s += gl[j][k] * cov;
          }
          tten[i][j] += s;
        }
    }

    const Vec2 v = metric.dual_at(id).apply(q);  // flow direction vector
    const Mat2 gm = metric.at(id);

    const int reps = dim == 1 ? 1 : n_xi;
    for (int r = 0; r < reps; ++r) {
      Vec2 e{1.0, 0.0};
      if (dim == 2) {
        const double th = two_pi * unit_uniform(rng);
        e = {std::cos(th), std::sin(th)};
      }
      const Vec2 xi = (1.0 / std::sqrt(gm.quad(e))) * e;

      double t_xi_v = 0.0, t_xi_xi = 0.0;
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          t_xi_v += tten[i][j] * xi[i] * v[j];
          t_xi_xi += tten[i][j] * xi[i] * xi[j];
        }
      rep.defect_max = std::max(rep.defect_max, std::abs(t_xi_v));

      const double pair = dot(xi, q);  // <xi, v>_metric equals the pairing
      const double denom =
          mode == FlowMode::Magnetic ? 1.0 - 0.5 * pair * pair : 1.0 - pair * pair;
      if (denom >= 0.1) rep.k_fit = std::max(rep.k_fit, t_xi_xi / denom);
    }
  }
  return rep;
}

void save_psi_csv(const PsiTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "m,t,psi\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k)
    out << trace.m << "," << fmt17(trace.times[k]) << "," << fmt17(trace.psi[k]) << "\n";
}

void save_hessian_json(const HessianReport& report, const std::string& path) {
  nlohmann::json j;
  j["mode"] = report.mode == FlowMode::Magnetic ? "magnetic" : "riemannian";
  j["n"] = report.requested;
  j["usable"] = report.usable;
  j["defect_max"] = report.defect_max;
  j["k_fit"] = report.k_fit;
  j["warn"] = report.warn;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace wkam
