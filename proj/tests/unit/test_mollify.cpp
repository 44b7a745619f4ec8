#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "wkam/flow.hpp"
#include "wkam/mollify.hpp"
#include "wkam/oracle.hpp"
#include "wkam/subdiff.hpp"

using namespace wkam;

namespace {

// g*-distance from the covector q to the convex hull, via the quadratic
// minimizer: with omega = -q, V = 0, c = 0 the selection returns
// indicator = -1/2 dist^2.
double hull_distance(const std::vector<Vec2>& hull, const Mat2& gstar, const Vec2& q) {
  const auto sel = project_momentum(hull, 2, gstar, {-q[0], -q[1]}, 0.0, 0.0);
  return std::sqrt(std::max(0.0, -2.0 * sel.indicator));
}

}  // namespace

TEST_CASE("kernel preserves constants and means") {
  const PeriodicGrid grid(2, 64);
  ScalarField c(grid, 0.7);
  const ScalarField cm = mollify(c, 16);
  for (std::size_t id = 0; id < grid.size(); ++id)
    CHECK(std::abs(cm.at(id) - 0.7) <= 1e-14);

  const oracle::TorusDistance td{};
  const PeriodicGrid g2(2, 128);
  const ScalarField u = td.sample(g2);
  const ScalarField um = mollify(u, 32);
  CHECK(std::abs(um.mean_value() - u.mean_value()) <= 1e-13);
}

TEST_CASE("under-resolved kernel raises") {
  const PeriodicGrid grid(2, 64);
  CHECK(kernel_resolvable(42, grid));
  CHECK(!kernel_resolvable(43, grid));
  CHECK(!kernel_resolvable(0, grid));
  const PeriodicGrid g256(2, 256);
  CHECK(kernel_resolvable(128, g256));
  CHECK(kernel_resolvable(170, g256));
  CHECK(!kernel_resolvable(171, g256));

  ScalarField u(grid);
  CHECK_THROWS_WITH_AS(mollify(u, 43), "kernel under-resolved", std::invalid_argument);
}

TEST_CASE("quadratic kernel bound on a sine field") {
  const PeriodicGrid grid(1, 1024);
  ScalarField u(grid);
  for (std::size_t id = 0; id < grid.size(); ++id)
    u.at(id) = std::sin(2.0 * std::numbers::pi * grid.point(id)[0]);

  double err[2];
  const int ms[2] = {16, 32};
  for (int k = 0; k < 2; ++k) {
    const ScalarField um = mollify(u, ms[k]);
    double e = 0.0;
    for (std::size_t id = 0; id < grid.size(); ++id)
      e = std::max(e, std::abs(um.at(id) - u.at(id)));
    err[k] = e;
    const double bound = std::pow(2.0 * std::numbers::pi, 2) / (2.0 * ms[k] * ms[k]);
    CHECK(e <= bound);
    CHECK(e > 0.0);
  }
  // Second-order kernel: halving the width quarters the error.
  CHECK(err[0] / err[1] >= 3.5);
  CHECK(err[0] / err[1] <= 4.5);
}

TEST_CASE("lipschitz envelope and gradient bound on the torus distance") {
  const int n = 256;
  const double h = 1.0 / n;
  const PeriodicGrid grid(2, n);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);

  const auto fam = build_family(u);
  REQUIRE(fam.ladder.size() == 4);
  REQUIRE(fam.fields.size() == 4);
  REQUIRE(fam.gradients.size() == 4);

  for (std::size_t k = 0; k < fam.ladder.size(); ++k) {
    const int m = fam.ladder[k];
    double sup = 0.0, gmax = 0.0;
    for (std::size_t id = 0; id < grid.size(); ++id) {
      sup = std::max(sup, std::abs(fam.fields[k].at(id) - u.at(id)));
      gmax = std::max(gmax, norm(fam.gradients[k].value(id)));
    }
    CHECK(sup <= 1.0 / m + 1e-9);       // Lip(u) = 1
    CHECK(gmax <= 1.0 + 10.0 * h);
  }

  // The symmetric kernel averages the two cut branches at the midline.
  const Vec2 p = fam.gradients[2].interp({0.5, 0.25});  // m = 64
  CHECK(std::abs(p[0] - 0.0) <= 0.05);
  CHECK(std::abs(p[1] - 0.447214) <= 0.05);
}

TEST_CASE("smoothed gradients converge into the reachable hull") {
  const int n = 256;
  const double h = 1.0 / n;
  const PeriodicGrid grid(2, n);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  const double c = oracle::TorusDistance::eikonal_c();

  std::vector<Vec2> pts;
  std::mt19937_64 rng(9114u);
  auto unit = [&] { return (rng() >> 11) * 0x1.0p-53; };
  while (pts.size() < 40) {
    const Vec2 x{unit(), unit()};
    const double r = grid.torus_dist(x, {0.0, 0.0});
    if (r >= 0.25 && r <= 0.45) pts.push_back(x);
  }
  for (double y : {0.02, 0.06, 0.10, 0.14, 0.18, 0.22, -0.06, -0.12, -0.18, -0.24})
    pts.push_back(grid.wrap_point({0.5, y}));

  const auto fam = build_family(u);
  for (std::size_t k = 0; k < fam.ladder.size(); ++k) {
    const int m = fam.ladder[k];
    const double bound = 5.0 * (1.0 / m + h);
    double worst = 0.0;
    for (const Vec2& x : pts) {
      const auto fan = gradient_fan(u, sys, c, x);
      const Vec2 q = fam.gradients[k].interp(x);
      worst = std::max(worst, hull_distance(fan.hull, sys.g.dual_interp(x), q));
    }
    CHECK(worst <= bound);
  }
}

TEST_CASE("smooth flow is stationary at the pendulum peak") {
  const int n = 512;
  const double h = 1.0 / n;
  const auto sys = oracle::Pendulum1D::system(n);
  const ScalarField u = oracle::Pendulum1D::sample_u(PeriodicGrid(1, n));

  for (int m : {16, 128}) {
    const ScalarField um = mollify(u, m);
    for (FlowMode mode : {FlowMode::Riemannian, FlowMode::Magnetic}) {
      const auto traj = smooth_flow(um, sys, mode, 0.0, {0.5, 0.0}, 0.25, h / 2.0);
      CHECK(traj.status == FlowStatus::Completed);
      double worst = 0.0;
      for (const Vec2& x : traj.points)
        worst = std::max(worst, std::abs(PeriodicGrid::torus_delta(0.5, x[0])));
      CHECK(worst <= 1.0 / m + 2.0 * h);
    }
  }
}

TEST_CASE("smooth flow tracks the generalized flow") {
  const int n = 256;
  const double h = 1.0 / n;
  const PeriodicGrid grid(2, n);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  const double c = oracle::TorusDistance::eikonal_c();

  const ScalarField um = mollify(u, 64);

  // Singular start on the cut midline: both flows ride the cut upward.
  const auto g1 = integrate_g1(u, sys, c, {0.5, 0.25}, 0.2, h / 2.0);
  const auto gm = smooth_flow(um, sys, FlowMode::Riemannian, c, {0.5, 0.25}, 0.2, h / 2.0);
  REQUIRE(g1.status == FlowStatus::Completed);
  REQUIRE(gm.status == FlowStatus::Completed);
  CHECK(grid.torus_dist(g1.endpoint(), gm.endpoint()) <= 0.05);

  // Smooth start: the gradient flow of the distance is the unit-speed ray.
  const Vec2 x0{0.2, 0.1};
  const double T = 0.1;
  const auto ray = smooth_flow(um, sys, FlowMode::Riemannian, c, x0, T, h / 2.0);
  REQUIRE(ray.status == FlowStatus::Completed);
  const double r0 = norm(x0);
  const Vec2 expect{x0[0] * (r0 + T) / r0, x0[1] * (r0 + T) / r0};
  CHECK(grid.torus_dist(ray.endpoint(), expect) <= 0.02);
}

TEST_CASE("smooth flow truncates at the gap boundary") {
  const int n = 256;
  const double h = 1.0 / n;
  const PeriodicGrid grid(1, n);
  ScalarField vraw(grid);
  ScalarField u(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const double x = grid.point(id)[0];
    vraw.at(id) = 0.25 * (std::cos(2.0 * std::numbers::pi * x) - 1.0);
    u.at(id) = -0.1 * (1.0 - std::cos(2.0 * std::numbers::pi * x));
  }
  const MagneticSystem sys(grid, MetricField::flat(grid),
                           OneFormField::constant(grid, {0.0, 0.0}),
                           PotentialField(vraw));

  const ScalarField um = mollify(u, 32);
  const auto traj = smooth_flow(um, sys, FlowMode::Riemannian, 0.0, {0.1, 0.0}, 1.0, h / 2.0);
  CHECK(traj.status == FlowStatus::LeftW);
  REQUIRE(!traj.points.empty());
  CHECK(traj.endpoint()[0] < 0.05);
  CHECK(traj.endpoint()[0] > 0.0);
}

TEST_CASE("psi decays along the cut and stays away from zero") {
  const int n = 256;
  const double h = 1.0 / n;
  const PeriodicGrid grid(2, n);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  const double c = oracle::TorusDistance::eikonal_c();
  const double delta_sing = std::max(10.0 * h, 0.02);

  for (int m : {32, 64, 128}) {
    const ScalarField um = mollify(u, m);
    const auto traj = smooth_flow(um, sys, FlowMode::Riemannian, c, {0.5, 0.25}, 0.2, h / 2.0);
    REQUIRE(traj.status == FlowStatus::Completed);
    const auto tr = psi_track(um, sys, FlowMode::Riemannian, c, traj, m);
    REQUIRE(tr.psi.size() == traj.points.size());
    CHECK(tr.fit_ok);
    CHECK(tr.c_fit >= 0.0);
    CHECK(std::isfinite(tr.c_fit));
    CHECK(tr.slack <= 0.1);
    // Once below -delta/2 the trace never climbs back across.
    for (std::size_t k = 0; k + 1 < tr.psi.size(); ++k)
      CHECK(!(tr.psi[k] < -0.5 * delta_sing && tr.psi[k + 1] >= -0.5 * delta_sing));
    if (m == 128) {
      CHECK(tr.psi.front() <= -0.7);
      for (std::size_t k = 0; k < tr.psi.size(); ++k) CHECK(tr.psi[k] <= -0.4);
    }
  }

  // Smooth start: the eikonal equation holds up to smoothing and grid error.
  const int m = 64;
  const ScalarField um = mollify(u, m);
  const auto ray = smooth_flow(um, sys, FlowMode::Riemannian, c, {0.2, 0.1}, 0.1, h / 2.0);
  const auto tr = psi_track(um, sys, FlowMode::Riemannian, c, ray, m);
  for (double v : tr.psi) CHECK(std::abs(v) <= 5.0 * (1.0 / m + h));
  CHECK(tr.c_fit == 0.0);
  CHECK(tr.fit_ok);
}

TEST_CASE("pendulum psi starts at minus one in the rescaled metric") {
  const int n = 512;
  const double h = 1.0 / n;
  const auto sys = oracle::Pendulum1D::system(n);
  const ScalarField u = oracle::Pendulum1D::sample_u(PeriodicGrid(1, n));
  const ScalarField um = mollify(u, 64);

  const auto traj = smooth_flow(um, sys, FlowMode::Magnetic, 0.0, {0.5, 0.0}, 0.2, h / 2.0);
  const auto tr = psi_track(um, sys, FlowMode::Magnetic, 0.0, traj, 64);
  CHECK(tr.psi.front() <= -0.8);
  CHECK(tr.psi.front() >= -1.0 - 1e-9);
  CHECK(tr.fit_ok);
  CHECK(tr.c_fit == 0.0);
}

TEST_CASE("hessian identity holds on the sampled torus distance") {
  const int n = 256;
  const PeriodicGrid grid(2, n);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);
  const auto sys = oracle::TorusDistance::eikonal_system(n);

  const auto rep = hessian_checks(u, sys, FlowMode::Riemannian, 0.5, 500);
  CHECK(rep.requested == 500);
  CHECK(!rep.warn);
  CHECK(rep.usable >= 250);
  CHECK(rep.defect_max <= 0.05);

  // Curvature bound K <= 1/r on the region u >= 0.1.
  HessianOptions opt;
  opt.min_value = 0.1;
  const auto kr = hessian_checks(u, sys, FlowMode::Riemannian, 0.5, 500, opt);
  CHECK(kr.k_fit <= 11.0);
  CHECK(kr.k_fit >= 2.0);
  CHECK(std::isfinite(kr.k_fit));
}

TEST_CASE("magnetic hessian terms vanish on the constant solution") {
  const int n = 256;
  const double h = 1.0 / n;
  const oracle::Magnetic1D mg{1.0};
  const auto sys = mg.system(n);
  ScalarField u(PeriodicGrid(1, n));

  const auto rep = hessian_checks(u, sys, FlowMode::Magnetic, mg.critical_value(), 100);
  CHECK(rep.usable == n);
  CHECK(!rep.warn);
  CHECK(rep.defect_max <= 10.0 * h);
  CHECK(rep.k_fit == 0.0);
}

TEST_CASE("psi trace and hessian report serialization") {
  const PeriodicGrid grid(2, 128);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);
  const auto sys = oracle::TorusDistance::eikonal_system(128);

  const ScalarField um = mollify(u, 32);
  const auto traj = smooth_flow(um, sys, FlowMode::Riemannian, 0.5, {0.5, 0.25}, 0.05,
                                0.5 / 128.0);
  const auto tr = psi_track(um, sys, FlowMode::Riemannian, 0.5, traj, 32);
  save_psi_csv(tr, "psi_test.csv");
  {
    std::ifstream in("psi_test.csv");
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "m,t,psi");
    std::size_t rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == tr.times.size());
  }

  const auto rep = hessian_checks(u, sys, FlowMode::Riemannian, 0.5, 50);
  save_hessian_json(rep, "hessian_test.json");
  {
    std::ifstream in("hessian_test.json");
    nlohmann::json j;
    in >> j;
    CHECK(j["n"] == 50);
    CHECK(j["mode"] == "riemannian");
    CHECK(j.contains("defect_max"));
    CHECK(j.contains("k_fit"));
    CHECK(j.contains("usable"));
    CHECK(j.contains("warn"));
  }
  std::remove("psi_test.csv");
  std::remove("hessian_test.json");
}

TEST_CASE("family builder rejects an unresolvable rung") {
  const PeriodicGrid grid(2, 64);
  const oracle::TorusDistance td{};
  const ScalarField u = td.sample(grid);
  CHECK_THROWS_AS(build_family(u, {16, 200}), std::invalid_argument);
}
