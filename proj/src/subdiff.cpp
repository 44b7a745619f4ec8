#include "wkam/subdiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace wkam {

namespace {

// One-sided gradients must agree within 5h per axis; the band of false
// positives this leaves around a kink is O(h) wide.
bool node_gradient(const ScalarField& u, std::size_t id, double slope_tol, Vec2& grad) {
  Vec2 bwd{0.0, 0.0}, fwd{0.0, 0.0};
  u.gradient_one_sided(id, bwd, fwd);
  for (int a = 0; a < u.grid().dim(); ++a)
    if (std::abs(fwd[a] - bwd[a]) > slope_tol) return false;
  grad = u.gradient_central(id);
  return true;
}

double dist2(const Vec2& a, const Vec2& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// True when every offset fits in an open half-plane: all same sign in 1D,
// largest cyclic angular gap exceeding pi in 2D. Offsets are node minus
// query positions and are never zero when this is called.
bool one_sided(const std::vector<Vec2>& dirs, int dim) {
  if (dim == 1) {
    bool pos = false, neg = false;
    for (const Vec2& d : dirs) (d[0] > 0.0 ? pos : neg) = true;
    return !(pos && neg);
  }
  std::vector<double> ang;
  ang.reserve(dirs.size());
  for (const Vec2& d : dirs) ang.push_back(std::atan2(d[1], d[0]));
  std::sort(ang.begin(), ang.end());
  const double pi = std::acos(-1.0);
  double gap = ang.front() + 2.0 * pi - ang.back();
  for (std::size_t i = 1; i < ang.size(); ++i)
    gap = std::max(gap, ang[i] - ang[i - 1]);
  return gap > pi + 1e-9;
}

// Complete-linkage agglomeration: merge the closest pair of clusters while
// their max pairwise member distance stays within theta. Input sizes are a
// handful of stencil nodes, so the cubic scan is fine.
std::vector<Vec2> cluster_means(const std::vector<Vec2>& pts, double theta, int dim) {
  const std::size_t k = pts.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      worst = std::max(worst, dist2(pts[i], pts[j], dim));
  std::vector<std::vector<std::size_t>> clusters;
  if (worst <= theta * theta) {
    clusters.push_back({});
    for (std::size_t i = 0; i < k; ++i) clusters[0].push_back(i);
  } else {
    for (std::size_t i = 0; i < k; ++i) clusters.push_back({i});
    while (clusters.size() > 1) {
      double best = 0.0;
      std::size_t ba = 0, bb = 0;
      bool found = false;
      for (std::size_t a = 0; a < clusters.size(); ++a) {
        for (std::size_t b = a + 1; b < clusters.size(); ++b) {
          double link = 0.0;
          for (std::size_t i : clusters[a])
            for (std::size_t j : clusters[b])
              link = std::max(link, dist2(pts[i], pts[j], dim));
          if (link <= theta * theta && (!found || link < best)) {
            best = link;
            ba = a;
            bb = b;
            found = true;
          }
        }
      }
      if (!found) break;
      clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
      clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
    }
  }
  std::vector<Vec2> means;
  means.reserve(clusters.size());
  for (const auto& members : clusters) {
    Vec2 m{0.0, 0.0};
    for (std::size_t i : members) m = m + pts[i];
    means.push_back(m * (1.0 / static_cast<double>(members.size())));
  }
  std::sort(means.begin(), means.end(), [](const Vec2& a, const Vec2& b) {
    return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
  });
  return means;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

Vec2 closest_on_segment(const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double den = dot(d, d);
  if (den <= 0.0) return a;
  const double t = std::clamp(-dot(a, d) / den, 0.0, 1.0);
  return a + t * d;
}

struct BallOffsets {
  std::vector<std::array<int, 2>> steps;
};

BallOffsets ball_offsets(const PeriodicGrid& grid, double r) {
  const double h = grid.h();
  const int m = static_cast<int>(std::floor(r / h + 1e-9));
  BallOffsets out;
  for (int di = -m; di <= m; ++di) {
    if (grid.dim() == 1) {
      if (std::abs(di) * h <= r + 1e-12) out.steps.push_back({di, 0});
    } else {
      for (int dj = -m; dj <= m; ++dj)
        if (std::sqrt(static_cast<double>(di * di + dj * dj)) * h <= r + 1e-12)
          out.steps.push_back({di, dj});
    }
  }
  return out;
}

double default_radius(double h, double r) { return r > 0.0 ? r : 2.0 * h; }
double default_theta(double h, double t) { return t > 0.0 ? t : std::max(6.0 * h, 0.05); }
double default_delta(double h, double d) { return d > 0.0 ? d : std::max(10.0 * h, 0.02); }

void check_radius(double r, double h) {
  if (r < 2.0 * h - 1e-12 || r > 8.0 * h + 1e-12)
    throw std::invalid_argument("fan radius must lie in [2h, 8h]");
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* node_class_name(NodeClass cls) {
  switch (cls) {
    case NodeClass::Regular: return "regular";
    case NodeClass::Boundary: return "boundary";
    case NodeClass::Singular: return "singular";
  }
  return "unknown";
}

std::vector<ReachableGradient> reachable_gradients(const ScalarField& u,
                                                   const MagneticSystem& sys,
                                                   const Vec2& x, double r,
                                                   double theta_c) {
  const PeriodicGrid& grid = u.grid();
  if (!grid.same_shape(sys.grid))
    throw std::invalid_argument("reachable_gradients: field and system grids differ");
  const double h = grid.h();
  check_radius(r, h);
  const double theta = default_theta(h, theta_c);
  const Vec2 xw = grid.wrap_point(x);

  const int ci = static_cast<int>(std::lround(xw[0] / h));
  const int cj = grid.dim() == 2 ? static_cast<int>(std::lround(xw[1] / h)) : 0;
  const int m = static_cast<int>(std::floor(r / h)) + 1;

  std::vector<Vec2> grads;
  std::vector<Vec2> diff_dirs;
  std::vector<std::size_t> blocked;
  double nearest_diff = std::numeric_limits<double>::infinity();
  double nearest_sing = std::numeric_limits<double>::infinity();
  for (int di = -m; di <= m; ++di) {
    for (int dj = (grid.dim() == 2 ? -m : 0); dj <= (grid.dim() == 2 ? m : 0); ++dj) {
      const int i = grid.wrap(ci + di);
      const int j = grid.dim() == 2 ? grid.wrap(cj + dj) : 0;
      const std::size_t id = grid.id(i, j);
      const Vec2 node = grid.point(id);
      Vec2 disp{0.0, 0.0};
      double d2 = 0.0;
      for (int a = 0; a < grid.dim(); ++a) {
        disp[a] = PeriodicGrid::torus_delta(xw[a], node[a]);
        d2 += disp[a] * disp[a];
      }
      const double d = std::sqrt(d2);
      if (d > r + 1e-12) continue;
      Vec2 g{0.0, 0.0};
      if (node_gradient(u, id, 5.0 * h, g)) {
        grads.push_back(g);
        diff_dirs.push_back(disp);
        nearest_diff = std::min(nearest_diff, d);
      } else {
        blocked.push_back(id);
        nearest_sing = std::min(nearest_sing, d);
      }
    }
  }
  if (grads.empty())
    throw std::runtime_error("fully singular neighborhood; increase r");

  const std::vector<Vec2> means = cluster_means(grads, theta, grid.dim());

  // A query whose nearest node is non-differentiable sits inside a kink band.
  // When every differentiable node also lies to one side AND some blocked
  // node carries a one-sided slope no cluster accounts for, the fan has seen
  // a single branch extrapolated across the band while the other branch is
  // provably present. Refuse rather than hand back half the fan. Marginal
  // curvature bands pass: their blocked slopes stay within theta of the
  // cluster they belong to.
  if (nearest_sing < nearest_diff - 1e-12 && one_sided(diff_dirs, grid.dim())) {
    bool alien = false;
    for (std::size_t id : blocked) {
      Vec2 bwd{0.0, 0.0}, fwd{0.0, 0.0};
      u.gradient_one_sided(id, bwd, fwd);
      const int combos = grid.dim() == 1 ? 2 : 4;
      for (int cb = 0; cb < combos && !alien; ++cb) {
        const Vec2 q{(cb & 1) ? fwd[0] : bwd[0], (cb & 2) ? fwd[1] : bwd[1]};
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& mu : means) best = std::min(best, dist2(q, mu, grid.dim()));
        alien = best > theta * theta;
      }
      if (alien) break;
    }
    if (alien)
      throw std::runtime_error("one-sided differentiable evidence; increase r");
  }

  std::vector<ReachableGradient> out;
  for (const Vec2& p : means)
    out.push_back({p, sys.hamiltonian(xw, p)});
  return out;
}

std::vector<Vec2> gradient_hull(const std::vector<Vec2>& points, int dim) {
  if (points.empty()) throw std::invalid_argument("gradient_hull: empty input");
  if (dim == 1) {
    double lo = points[0][0], hi = points[0][0];
    for (const Vec2& p : points) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
    if (hi - lo <= 1e-12) return {{lo, 0.0}};
    return {{lo, 0.0}, {hi, 0.0}};
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      worst = std::max(worst, dist2(points[i], points[j], 2));
  if (worst <= 1e-24) return {points[0]};

  std::vector<Vec2> p = points;
  std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) {
    return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  const std::size_t k = p.size();
  if (k <= 2) return p;

  std::vector<Vec2> hull(2 * k);
  std::size_t m = 0;
  for (std::size_t i = 0; i < k; ++i) {
    while (m >= 2 && cross(hull[m - 2], hull[m - 1], p[i]) <= 0.0) --m;
    hull[m++] = p[i];
  }
  const std::size_t lower = m + 1;
  for (std::size_t i = k - 1; i-- > 0;) {
    while (m >= lower && cross(hull[m - 2], hull[m - 1], p[i]) <= 0.0) --m;
    hull[m++] = p[i];
  }
  hull.resize(m - 1);
  return hull;
}

MomentumSelection project_momentum(const std::vector<Vec2>& points, int dim,
                                   const Mat2& gstar, const Vec2& omega,
                                   double potential, double c) {
  if (points.empty())
    throw std::invalid_argument("momentum selection needs a nonempty gradient set");
  const auto hull = gradient_hull(points, dim);

  Vec2 p_sharp{0.0, 0.0};
  if (dim == 1) {
    const double lo = hull.front()[0];
    const double hi = hull.back()[0];
    p_sharp = {std::clamp(-omega[0], lo, hi), 0.0};
  } else {
    // Cholesky gstar = L L^T maps p to z = L^T (p + omega); minimizing
    // 1/2 g*(p+omega, p+omega) over the hull is the Euclidean closest point
    // to the origin over the transformed hull.
    const double l11 = std::sqrt(gstar.a11);
    const double l21 = gstar.a12 / l11;
    const double arg = gstar.a22 - l21 * l21;
    if (!(l11 > 0.0) || !(arg > 0.0))
      throw std::runtime_error("dual metric not positive definite");
    const double l22 = std::sqrt(arg);
    std::vector<Vec2> z(hull.size());
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const double q1 = hull[i][0] + omega[0];
      const double q2 = hull[i][1] + omega[1];
      z[i] = {l11 * q1 + l21 * q2, l22 * q2};
    }
    Vec2 zstar{0.0, 0.0};
    if (z.size() == 1) {
      zstar = z[0];
    } else {
      bool inside = z.size() >= 3;
      for (std::size_t i = 0; inside && i < z.size(); ++i) {
        const Vec2& a = z[i];
        const Vec2& b = z[(i + 1) % z.size()];
        if (a[0] * b[1] - a[1] * b[0] < 0.0) inside = false;
      }
      if (!inside) {
        const std::size_t edges = z.size() == 2 ? 1 : z.size();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < edges; ++i) {
          const Vec2 cand = closest_on_segment(z[i], z[(i + 1) % z.size()]);
          const double q = dot(cand, cand);
          if (q < best) {
            best = q;
            zstar = cand;
          }
        }
      }
    }
    const double q2 = zstar[1] / l22;
    const double q1 = (zstar[0] - l21 * q2) / l11;
    p_sharp = {q1 - omega[0], q2 - omega[1]};
  }

  const Vec2 q = p_sharp + omega;
  const double ham = 0.5 * gstar.quad(q) + potential;
  return {p_sharp, c - ham};
}

MomentumSelection momentum_selection(const std::vector<ReachableGradient>& reachable,
                                     const MagneticSystem& sys, double c,
                                     const Vec2& x) {
  std::vector<Vec2> pts;
  pts.reserve(reachable.size());
  for (const auto& r : reachable) pts.push_back(r.p);
  const Vec2 xw = sys.grid.wrap_point(x);
  return project_momentum(pts, sys.grid.dim(), sys.g.dual_interp(xw),
                          sys.omega.interp(xw), sys.V.interp(xw), c);
}

GradientFan gradient_fan(const ScalarField& u, const MagneticSystem& sys,
                         double c, const Vec2& x, const SubdiffOptions& opt) {
  const double h = u.grid().h();
  GradientFan fan;
  fan.x = u.grid().wrap_point(x);
  fan.reachable = reachable_gradients(u, sys, fan.x, default_radius(h, opt.radius),
                                      opt.theta_c);
  std::vector<Vec2> pts;
  pts.reserve(fan.reachable.size());
  for (const auto& r : fan.reachable) pts.push_back(r.p);
  fan.hull = gradient_hull(pts, u.grid().dim());
  const auto sel = momentum_selection(fan.reachable, sys, c, fan.x);
  fan.p_sharp = sel.p_sharp;
  fan.indicator = sel.indicator;
  return fan;
}

NodeClass classify(double indicator, double delta_sing) {
  if (indicator > delta_sing) return NodeClass::Singular;
  if (indicator >= -delta_sing) return NodeClass::Boundary;
  return NodeClass::Regular;
}

SingularSet singular_set(const ScalarField& u, const MagneticSystem& sys,
                         double c, const SubdiffOptions& opt) {
  const PeriodicGrid& grid = u.grid();
  if (!grid.same_shape(sys.grid))
    throw std::invalid_argument("singular_set: field and system grids differ");
  const double h = grid.h();
  const double r = default_radius(h, opt.radius);
  check_radius(r, h);
  const double theta = default_theta(h, opt.theta_c);
  const double delta = default_delta(h, opt.delta_sing);
  const std::size_t size = grid.size();

  std::vector<char> diff(size, 0);
  std::vector<Vec2> grad(size, Vec2{0.0, 0.0});
  for (std::size_t id = 0; id < size; ++id)
    diff[id] = node_gradient(u, id, 5.0 * h, grad[id]) ? 1 : 0;

  const auto ball = ball_offsets(grid, r);

  SingularSet out{ScalarField(grid), std::vector<NodeClass>(size, NodeClass::Boundary),
                  {}, {}, delta, 0};
  std::vector<Vec2> local;
  for (std::size_t id = 0; id < size; ++id) {
    const auto cc = grid.coords(id);
    local.clear();
    for (const auto& s : ball.steps) {
      const std::size_t nb = grid.id(cc[0] + s[0], cc[1] + s[1]);
      if (diff[nb]) local.push_back(grad[nb]);
    }
    if (local.empty()) {
      ++out.fan_failures;
      out.indicator.at(id) = 0.0;
      out.classes[id] = NodeClass::Boundary;
      continue;
    }
    const auto means = cluster_means(local, theta, grid.dim());
    const auto sel = project_momentum(means, grid.dim(), sys.g.dual_at(id),
                                      sys.omega.value(id), sys.V.at(id), c);
    out.indicator.at(id) = sel.indicator;
    out.classes[id] = classify(sel.indicator, delta);
    if (out.classes[id] == NodeClass::Singular) out.singular_nodes.push_back(id);
  }

  std::vector<char> in_cut(size, 0);
  for (std::size_t id : out.singular_nodes) {
    in_cut[id] = 1;
    const auto cc = grid.coords(id);
    in_cut[grid.id(cc[0] - 1, cc[1])] = 1;
    in_cut[grid.id(cc[0] + 1, cc[1])] = 1;
    if (grid.dim() == 2) {
      in_cut[grid.id(cc[0], cc[1] - 1)] = 1;
      in_cut[grid.id(cc[0], cc[1] + 1)] = 1;
    }
  }
  for (std::size_t id = 0; id < size; ++id)
    if (in_cut[id]) out.cut_nodes.push_back(id);
  return out;
}

void save_singular_set(const SingularSet& s, const std::string& stem) {
  const PeriodicGrid& grid = s.indicator.grid();
  nlohmann::json j;
  j["kind"] = "singular-set";
  j["dim"] = grid.dim();
  j["n"] = grid.n();
  j["delta_sing"] = s.delta_sing;
  j["singular_count"] = s.singular_nodes.size();
  j["cut_count"] = s.cut_nodes.size();
  j["fan_failures"] = s.fan_failures;
  std::ofstream meta(stem + ".json");
  if (!meta) throw std::runtime_error("cannot write " + stem + ".json");
  meta << j.dump(2) << "\n";

  std::ofstream out(stem + ".csv");
  if (!out) throw std::runtime_error("cannot write " + stem + ".csv");
  out << "node,i,j,indicator,class\n";
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const auto cc = grid.coords(id);
    out << id << "," << cc[0] << "," << cc[1] << "," << fmt17(s.indicator.at(id))
        << "," << node_class_name(s.classes[id]) << "\n";
  }
}

void save_fan_json(const GradientFan& fan, const std::string& path) {
  nlohmann::json j;
  j["x"] = {fan.x[0], fan.x[1]};
  j["reachable"] = nlohmann::json::array();
  for (const auto& r : fan.reachable)
    j["reachable"].push_back({{"p", {r.p[0], r.p[1]}}, {"hamiltonian", r.hamiltonian}});
  j["hull"] = nlohmann::json::array();
  for (const auto& v : fan.hull) j["hull"].push_back({v[0], v[1]});
  j["p_sharp"] = {fan.p_sharp[0], fan.p_sharp[1]};
  j["indicator"] = fan.indicator;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace wkam
