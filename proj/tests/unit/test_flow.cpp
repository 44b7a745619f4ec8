#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "wkam/flow.hpp"
#include "wkam/hj_solver.hpp"
#include "wkam/oracle.hpp"

using namespace wkam;

namespace {

// Closed-form reduction of the cut-line flow of the torus distance from
// (0.5, y): p# = (0, y / sqrt(1/4 + y^2)), so y satisfies a scalar ODE.
double cut_line_y(double y0, double T) {
  double y = y0;
  const int N = 20000;
  const double dt = T / N;
  auto rhs = [](double v) { return v / std::sqrt(0.25 + v * v); };
  for (int k = 0; k < N; ++k) {
    const double k1 = rhs(y);
    const double k2 = rhs(y + 0.5 * dt * k1);
    const double k3 = rhs(y + 0.5 * dt * k2);
    const double k4 = rhs(y + dt * k3);
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

}  // namespace

TEST_CASE("flow input validation") {
  const int n = 256;
  const auto sys = oracle::Pendulum1D::system(n);
  const ScalarField u = oracle::Pendulum1D::sample_u(sys.grid);
  CHECK_THROWS_AS(integrate_g1(u, sys, 0.0, {0.25, 0.0}, 0.1, 1.0 / n),
                  std::invalid_argument);  // step > h/2
  CHECK_THROWS_AS(integrate_g1(u, sys, 0.0, {0.25, 0.0}, 0.0, 0.5 / n),
                  std::invalid_argument);  // empty horizon
  CHECK_THROWS_AS(integrate_g1(u, sys, 0.0, {0.0, 0.0}, 0.1, 0.5 / n),
                  std::invalid_argument);  // start outside W
}

TEST_CASE("pendulum kink is stationary under both flows") {
  const int n = 512;
  const double h = 1.0 / n;
  const auto sys = oracle::Pendulum1D::system(n);
  const auto wk = solve_critical(sys, 0.0);

  for (const bool rescaled : {false, true}) {
    const auto traj = rescaled
                          ? integrate_g2(wk.u, sys, 0.0, {0.5, 0.0}, 0.3, h / 2.0)
                          : integrate_g1(wk.u, sys, 0.0, {0.5, 0.0}, 0.3, h / 2.0);
    CHECK(traj.status == FlowStatus::Completed);
    for (const Vec2& x : traj.points)
      CHECK(std::abs(PeriodicGrid::torus_delta(x[0], 0.5)) <= 2.0 * h);
  }
}

TEST_CASE("cut-line flow of the torus distance") {
  const int n = 256;
  const double h = 1.0 / n;
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  const ScalarField u = eikonal_distance(sys.g, {sys.grid.id(0, 0)});
  const double c = oracle::TorusDistance::eikonal_c();
  const double T = 0.2;
  const auto traj = integrate_g1(u, sys, c, {0.5, 0.25}, T, h / 2.0);

  CHECK(traj.status == FlowStatus::Completed);
  REQUIRE(traj.points.size() > 10);

  for (const Vec2& x : traj.points)
    CHECK(std::abs(PeriodicGrid::torus_delta(x[0], 0.5)) <= 3.0 * h);

  const double y_ref = cut_line_y(0.25, T);
  CHECK(std::abs(traj.endpoint()[1] - y_ref) <= 5.0 * h);

  // accepted steps respect the speed bound and strictly increase in time
  const double vcap = sys.speed_bound(c) + 1.0;
  for (std::size_t k = 1; k < traj.points.size(); ++k) {
    const double dt = traj.times[k] - traj.times[k - 1];
    CHECK(dt > 0.0);
    CHECK(sys.grid.torus_dist(traj.points[k - 1], traj.points[k]) <= dt * vcap);
  }

  const auto inv = verify_invariance(traj, std::max(10.0 * h, 0.02));
  CHECK(inv.applicable);
  CHECK(inv.pass);
  CHECK(inv.min_indicator >= 0.2);
}

TEST_CASE("smooth start follows the unit-speed ray") {
  const int n = 256;
  const double h = 1.0 / n;
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  const ScalarField u = eikonal_distance(sys.g, {sys.grid.id(0, 0)});
  const double c = oracle::TorusDistance::eikonal_c();
  const double T = 0.1;
  const auto traj = integrate_g1(u, sys, c, {0.25, 0.25}, T, h / 2.0);

  CHECK(traj.status == FlowStatus::Completed);
  const double s = 1.0 / std::sqrt(2.0);
  const Vec2 expect{0.25 + T * s, 0.25 + T * s};
  CHECK(sys.grid.torus_dist(traj.endpoint(), expect) <= 3.0 * h + 10.0 * (h / 2.0));

  const auto inv = verify_invariance(traj, std::max(10.0 * h, 0.02));
  CHECK(!inv.applicable);
  CHECK(inv.pass);
}

TEST_CASE("unit energy gap makes the two flows identical") {
  const int n = 256;
  const double h = 1.0 / n;
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  oracle::TorusDistance oracle_d{{0.0, 0.0}};
  ScalarField u = oracle_d.sample(sys.grid);
  for (std::size_t id = 0; id < u.size(); ++id) u.at(id) *= std::sqrt(2.0);

  const auto g1 = integrate_g1(u, sys, 1.0, {0.2, 0.1}, 0.1, h / 2.0);
  const auto g2 = integrate_g2(u, sys, 1.0, {0.2, 0.1}, 0.1, h / 2.0);
  CHECK(g1.status == FlowStatus::Completed);
  CHECK(g2.status == FlowStatus::Completed);
  REQUIRE(g1.points.size() == g2.points.size());
  for (std::size_t k = 0; k < g1.points.size(); ++k)
    CHECK(sys.grid.torus_dist(g1.points[k], g2.points[k]) <= 1e-12);
}

TEST_CASE("constant gap reparameterization is a linear time change") {
  const int n = 256;
  const double h = 1.0 / n;
  const double step = h / 2.0;
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  const ScalarField u = eikonal_distance(sys.g, {sys.grid.id(0, 0)});
  const double c = oracle::TorusDistance::eikonal_c();

  const auto g1 = integrate_g1(u, sys, c, {0.25, 0.25}, 0.15, step);
  const auto g2 = integrate_g2(u, sys, c, {0.25, 0.25}, 0.15, step);
  const EnergyGapField gap(sys, c);
  const auto rep = verify_reparam(g1, g2, gap);

  CHECK(rep.monotone);
  CHECK(rep.s_total == doctest::Approx(0.5 * 0.15).epsilon(1e-6));
  CHECK(rep.compared > 10);
  CHECK(rep.max_resample_dist <= 2.0 * step * 2.0);  // speed 2 under G2

  CHECK_THROWS_AS(verify_reparam(g1, integrate_g2(u, sys, c, {0.3, 0.25}, 0.15, step), gap),
                  std::invalid_argument);
}

TEST_CASE("pendulum flows coincide after reparameterization") {
  const int n = 512;
  const double h = 1.0 / n;
  const double step = h / 2.0;
  const auto sys = oracle::Pendulum1D::system(n);
  const auto wk = solve_critical(sys, 0.0);

  const auto g1 = integrate_g1(wk.u, sys, 0.0, {0.25, 0.0}, 0.2, step);
  const auto g2 = integrate_g2(wk.u, sys, 0.0, {0.25, 0.0}, 0.2, step);
  REQUIRE(g1.status == FlowStatus::Completed);
  REQUIRE(g2.status == FlowStatus::Completed);

  const EnergyGapField gap(sys, 0.0);
  const auto rep = verify_reparam(g1, g2, gap);
  CHECK(rep.monotone);
  CHECK(rep.max_resample_dist <= 5.0 * (step + h));
  CHECK(rep.frechet_dist <= 5.0 * (step + h));
}

TEST_CASE("flow leaves W when the gap collapses") {
  // shallow well with |u''| < 5 so the gradient stays resolvable while the
  // descent runs into the f = 0 point at the origin
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

  const auto traj = integrate_g1(u, sys, 0.0, {0.1, 0.0}, 1.0, h / 2.0);
  CHECK(traj.status == FlowStatus::LeftW);
  REQUIRE(!traj.points.empty());
  CHECK(traj.endpoint()[0] < 0.05);
  CHECK(traj.endpoint()[0] > 0.0);
}

TEST_CASE("fully singular data stalls with diagnostics") {
  const int n = 64;
  const auto sys = oracle::TorusDistance::eikonal_system(n);
  ScalarField u(sys.grid);
  const double amp = 2.0 / n;
  for (std::size_t id = 0; id < sys.grid.size(); ++id) {
    const auto cc = sys.grid.coords(id);
    u.at(id) = ((cc[0] + cc[1]) % 2 == 0) ? amp : -amp;
  }
  const auto traj = integrate_g1(u, sys, 0.5, {0.5, 0.5}, 0.1, 0.5 / n);
  CHECK(traj.status == FlowStatus::Stalled);
  CHECK(traj.points.empty());
  CHECK(traj.note.find("fully singular") != std::string::npos);
}

TEST_CASE("uniqueness probe over fan radii") {
  const int n = 256;
  const double h = 1.0 / n;
  const double step = h / 2.0;

  SUBCASE("stationary pendulum kink") {
    const auto sys = oracle::Pendulum1D::system(n);
    const auto wk = solve_critical(sys, 0.0);
    const std::vector<FlowPerturbation> perts{{2.0 * h, nullptr, 0.0},
                                              {3.0 * h, nullptr, 0.0},
                                              {4.0 * h, nullptr, 0.0}};
    const auto rep = uniqueness_probe(wk.u, sys, 0.0, {0.5, 0.0}, 0.2, step, perts);
    CHECK(rep.runs == 3);
    CHECK(rep.all_completed);
    CHECK(rep.max_pairwise <= 2.0 * h);
    CHECK(rep.bound == doctest::Approx(5.0 * (h + step)));
    CHECK(rep.pass);
  }

  SUBCASE("cut-line start stays coherent") {
    const auto sys = oracle::TorusDistance::eikonal_system(n);
    const ScalarField u = eikonal_distance(sys.g, {sys.grid.id(0, 0)});
    const std::vector<FlowPerturbation> perts{{2.0 * h, nullptr, 0.0},
                                              {3.0 * h, nullptr, 0.0},
                                              {4.0 * h, nullptr, 0.0}};
    const auto rep = uniqueness_probe(u, sys, 0.5, {0.5, 0.25}, 0.2, step, perts);
    CHECK(rep.all_completed);
    CHECK(rep.pass);
  }

  SUBCASE("identical settings are bit-identical") {
    const auto sys = oracle::TorusDistance::eikonal_system(n);
    const ScalarField u = eikonal_distance(sys.g, {sys.grid.id(0, 0)});
    const std::vector<FlowPerturbation> perts{{2.0 * h, nullptr, 0.0},
                                              {2.0 * h, nullptr, 0.0}};
    const auto rep = uniqueness_probe(u, sys, 0.5, {0.5, 0.25}, 0.1, step, perts);
    CHECK(rep.max_pairwise == 0.0);
  }
}

TEST_CASE("discrete frechet basics") {
  const PeriodicGrid grid(2, 64);
  const std::vector<Vec2> a{{0.1, 0.1}, {0.2, 0.1}, {0.3, 0.1}};
  CHECK(discrete_frechet(a, a, grid) == 0.0);
  const std::vector<Vec2> b{{0.1, 0.15}, {0.2, 0.15}, {0.3, 0.15}};
  CHECK(discrete_frechet(a, b, grid) == doctest::Approx(0.05));
  const std::vector<Vec2> c{{0.95, 0.1}};
  const std::vector<Vec2> d{{0.05, 0.1}};
  CHECK(discrete_frechet(c, d, grid) == doctest::Approx(0.1));
}

TEST_CASE("trajectory serialization") {
  const int n = 128;
  const auto sys = oracle::Pendulum1D::system(n);
  const ScalarField u = oracle::Pendulum1D::sample_u(sys.grid);
  const auto traj = integrate_g1(u, sys, 0.0, {0.25, 0.0}, 0.05, 0.5 / n);
  const std::string path = "/tmp/wkam_test_traj.csv";
  save_trajectory_csv(traj, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x,y,indicator,p_sharp_norm");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == traj.points.size());
  std::remove(path.c_str());
}
