// Python surface over the core library. Vectors and points cross the boundary
// as plain sequences; enums cross as strings.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "wkam/flow.hpp"
#include "wkam/geometry.hpp"
#include "wkam/hj_solver.hpp"
#include "wkam/mollify.hpp"
#include "wkam/oracle.hpp"
#include "wkam/subdiff.hpp"
#include "wkam/system.hpp"

namespace py = pybind11;
using namespace wkam;

namespace {

FlowMode parse_mode(const std::string& mode) {
  if (mode == "riemannian") return FlowMode::Riemannian;
  if (mode == "magnetic") return FlowMode::Magnetic;
  throw std::invalid_argument("mode must be 'riemannian' or 'magnetic'");
}

SubdiffOptions make_subdiff(double radius, double theta_c, double delta_sing) {
  SubdiffOptions opt;
  opt.radius = radius;
  opt.theta_c = theta_c;
  opt.delta_sing = delta_sing;
  return opt;
}

MagneticSystem make_system(int dim, int n, const std::vector<double>& potential,
                           const Vec2& omega) {
  PeriodicGrid grid(dim, n);
  if (potential.size() != grid.size())
    throw std::invalid_argument("potential must hold one value per grid node");
  ScalarField v(grid, std::vector<double>(potential));
  return MagneticSystem(grid, MetricField::flat(grid), OneFormField::constant(grid, omega),
                        PotentialField(std::move(v)));
}

MagneticSystem make_magnetic2d(int n, double a) {
  PeriodicGrid grid(2, n);
  ScalarField v(grid);
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const Vec2 x = grid.point(id);
    v.at(id) = -0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x[0])) *
               (1.0 - std::cos(2.0 * std::numbers::pi * x[1]));
  }
  return MagneticSystem(grid, MetricField::flat(grid), OneFormField::constant(grid, {a, 0.0}),
                        PotentialField(std::move(v)));
}

py::dict trajectory_dict(const Trajectory& traj) {
  py::dict d;
  d["times"] = traj.times;
  d["points"] = traj.points;
  d["p_sharp"] = traj.p_sharp;
  d["indicator"] = traj.indicator;
  d["status"] = flow_status_name(traj.status);
  d["note"] = traj.note;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "weak KAM toolkit on flat tori: critical values, singular sets, "
            "generalized gradient flows";

  py::class_<PeriodicGrid>(m, "Grid")
      .def(py::init<int, int>(), py::arg("dim"), py::arg("n"))
      .def_property_readonly("dim", &PeriodicGrid::dim)
      .def_property_readonly("n", &PeriodicGrid::n)
      .def_property_readonly("h", &PeriodicGrid::h)
      .def_property_readonly("size", &PeriodicGrid::size)
      .def("point", &PeriodicGrid::point, py::arg("node"))
      .def("node", [](const PeriodicGrid& g, int i, int j) { return g.id(i, j); },
           py::arg("i"), py::arg("j") = 0);

  py::class_<ScalarField>(m, "ScalarField")
      .def(py::init([](const PeriodicGrid& grid, const std::vector<double>& values) {
             return ScalarField(grid, std::vector<double>(values));
           }),
           py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &ScalarField::grid)
      .def_property_readonly("values",
                             [](const ScalarField& f) { return f.data(); })
      .def("interp", &ScalarField::interp, py::arg("x"))
      .def("__len__", &ScalarField::size);

  py::class_<MagneticSystem>(m, "System")
      .def_property_readonly("grid",
                             [](const MagneticSystem& s) { return s.grid; })
      .def("hamiltonian", &MagneticSystem::hamiltonian, py::arg("x"), py::arg("p"))
      .def("potential",
           [](const MagneticSystem& s, const Vec2& x) { return s.V.interp(x); },
           py::arg("x"));

  m.def("system", &make_system, py::arg("dim"), py::arg("n"), py::arg("potential"),
        py::arg("omega") = Vec2{0.0, 0.0},
        "Flat-metric system from a per-node potential and a constant 1-form.");
  m.def("pendulum", &oracle::Pendulum1D::system, py::arg("n"));
  m.def("magnetic_1d",
        [](int n, double a) { return oracle::Magnetic1D{a}.system(n); },
        py::arg("n"), py::arg("a") = 1.0);
  m.def("magnetic_2d", &make_magnetic2d, py::arg("n"), py::arg("a") = 0.3,
        "Cosine-well potential with a constant 1-form a dx.");
  m.def("torus_eikonal", &oracle::TorusDistance::eikonal_system, py::arg("n"));

  m.def(
      "estimate_critical_value",
      [](const MagneticSystem& sys, double shape_tol, double bound_tol) {
        CriticalValueOptions opt;
        // 2D sweeps level out to a looser plateau; same default the CLI uses
        opt.shape_tol = shape_tol > 0.0 ? shape_tol : (sys.grid.dim() == 2 ? 1e-6 : 1e-9);
        opt.bound_tol = bound_tol;
        const auto est = estimate_critical_value(sys, opt);
        py::dict d;
        d["c"] = est.c;
        d["loop_bound"] = est.loop_bound;
        d["iterations"] = est.iterations;
        return d;
      },
      py::arg("sys"), py::arg("shape_tol") = 0.0, py::arg("bound_tol") = 0.02,
      "Mechanical critical value estimate; shape_tol 0 keeps the default.");

  m.def(
      "solve_critical",
      [](const MagneticSystem& sys, double c) {
        const auto wk = solve_critical(sys, c);
        py::dict info;
        info["c"] = wk.c;
        info["residual_max"] = wk.residual_max;
        info["residual_l2"] = wk.residual_l2;
        info["iterations"] = wk.iterations;
        info["method"] = wk.method;
        return py::make_tuple(wk.u, info);
      },
      py::arg("sys"), py::arg("c"), "Weak KAM solution at level c; returns (u, info).");

  m.def(
      "eikonal_distance",
      [](const MagneticSystem& sys, const std::vector<std::size_t>& sources) {
        return eikonal_distance(sys.g, sources);
      },
      py::arg("sys"), py::arg("sources"),
      "Riemannian distance to the given source nodes under sys's metric.");

  m.def(
      "singular_set",
      [](const ScalarField& u, const MagneticSystem& sys, double c, double radius,
         double theta_c, double delta_sing) {
        const auto s = singular_set(u, sys, c, make_subdiff(radius, theta_c, delta_sing));
        py::dict d;
        d["indicator"] = s.indicator;
        std::vector<std::string> classes;
        classes.reserve(s.classes.size());
        for (NodeClass cls : s.classes) classes.emplace_back(node_class_name(cls));
        d["classes"] = classes;
        d["singular_nodes"] = s.singular_nodes;
        d["cut_nodes"] = s.cut_nodes;
        d["delta_sing"] = s.delta_sing;
        d["fan_failures"] = s.fan_failures;
        return d;
      },
      py::arg("u"), py::arg("sys"), py::arg("c"), py::arg("radius") = 0.0,
      py::arg("theta_c") = 0.0, py::arg("delta_sing") = 0.0,
      "Classify every node; option 0 keeps the grid-derived default.");

  m.def(
      "gradient_fan",
      [](const ScalarField& u, const MagneticSystem& sys, double c, const Vec2& x,
         double radius, double theta_c, double delta_sing) {
        const auto fan =
            gradient_fan(u, sys, c, x, make_subdiff(radius, theta_c, delta_sing));
        py::dict d;
        d["x"] = fan.x;
        std::vector<Vec2> reach;
        reach.reserve(fan.reachable.size());
        for (const auto& r : fan.reachable) reach.push_back(r.p);
        d["reachable"] = reach;
        d["hull"] = fan.hull;
        d["p_sharp"] = fan.p_sharp;
        d["indicator"] = fan.indicator;
        return d;
      },
      py::arg("u"), py::arg("sys"), py::arg("c"), py::arg("x"), py::arg("radius") = 0.0,
      py::arg("theta_c") = 0.0, py::arg("delta_sing") = 0.0);

  const auto flow_binding = [](bool second) {
    return [second](const ScalarField& u, const MagneticSystem& sys, double c, const Vec2& x0,
                    double T, double step, double fan_radius, double eps_f) {
      FlowOptions opt;
      opt.eps_f = eps_f;
      if (fan_radius > 0.0) opt.subdiff.radius = fan_radius;
      const auto traj = second ? integrate_g2(u, sys, c, x0, T, step, opt)
                               : integrate_g1(u, sys, c, x0, T, step, opt);
      return trajectory_dict(traj);
    };
  };
  m.def("integrate_g1", flow_binding(false), py::arg("u"), py::arg("sys"), py::arg("c"),
        py::arg("x0"), py::arg("T"), py::arg("step"), py::arg("fan_radius") = 0.0,
        py::arg("eps_f") = 1e-3,
        "Generalized gradient flow dx/dt = H_p(x, p#); fan_radius in absolute units, "
        "0 keeps the 2h default.");
  m.def("integrate_g2", flow_binding(true), py::arg("u"), py::arg("sys"), py::arg("c"),
        py::arg("x0"), py::arg("T"), py::arg("step"), py::arg("fan_radius") = 0.0,
        py::arg("eps_f") = 1e-3, "As integrate_g1 with velocity rescaled by 1/(c - V).");

  m.def(
      "min_indicator",
      [](const py::dict& traj) {
        const auto ind = traj["indicator"].cast<std::vector<double>>();
        double mi = std::numeric_limits<double>::infinity();
        for (double v : ind) mi = std::min(mi, v);
        return mi;
      },
      py::arg("trajectory"), "Smallest accepted indicator value along a flow.");

  m.def("mollify", &mollify, py::arg("u"), py::arg("m"),
        "Periodic Gaussian mollification at scale 1/m; requires 2/m >= 3h.");

  m.def(
      "smooth_flow",
      [](const ScalarField& um, const MagneticSystem& sys, const std::string& mode, double c,
         const Vec2& x0, double T, double step, double eps_f) {
        return trajectory_dict(smooth_flow(um, sys, parse_mode(mode), c, x0, T, step, eps_f));
      },
      py::arg("um"), py::arg("sys"), py::arg("mode"), py::arg("c"), py::arg("x0"), py::arg("T"),
      py::arg("step"), py::arg("eps_f") = 1e-3);

  m.def(
      "psi_track",
      [](const ScalarField& um, const MagneticSystem& sys, const std::string& mode, double c,
         const py::dict& traj, int mval) {
        Trajectory g;
        g.times = traj["times"].cast<std::vector<double>>();
        g.points = traj["points"].cast<std::vector<Vec2>>();
        const auto tr = psi_track(um, sys, parse_mode(mode), c, g, mval);
        py::dict d;
        d["m"] = tr.m;
        d["times"] = tr.times;
        d["psi"] = tr.psi;
        d["slack"] = tr.slack;
        d["c_fit"] = tr.c_fit;
        d["fit_ok"] = tr.fit_ok;
        return d;
      },
      py::arg("um"), py::arg("sys"), py::arg("mode"), py::arg("c"), py::arg("trajectory"),
      py::arg("m"), "Energy-gap tracker psi along a smooth-flow trajectory.");

  m.def(
      "hessian_checks",
      [](const ScalarField& u, const MagneticSystem& sys, const std::string& mode, double c,
         int n_samples) {
        const auto rep = hessian_checks(u, sys, parse_mode(mode), c, n_samples);
        py::dict d;
        d["requested"] = rep.requested;
        d["usable"] = rep.usable;
        d["defect_max"] = rep.defect_max;
        d["k_fit"] = rep.k_fit;
        d["warn"] = rep.warn;
        return d;
      },
      py::arg("u"), py::arg("sys"), py::arg("mode"), py::arg("c"), py::arg("n_samples") = 500);

  m.def("path_action", &oracle::path_action, py::arg("sys"), py::arg("lifted"), py::arg("T"),
        "Action of a piecewise-linear path given by lifted vertices.");
  m.def(
      "brute_force_action",
      [](const MagneticSystem& sys, const Vec2& x, const Vec2& y, double T) {
        return oracle::brute_force_action(sys, x, y, T);
      },
      py::arg("sys"), py::arg("x"), py::arg("y"), py::arg("T"),
      "Upper bound on the minimal action from x to y in time T.");

  m.def(
      "torus_distance_field",
      [](const PeriodicGrid& grid, const Vec2& x0) {
        return oracle::TorusDistance{x0}.sample(grid);
      },
      py::arg("grid"), py::arg("x0") = Vec2{0.0, 0.0},
      "Closed-form flat-torus distance to x0, sampled on the grid.");
  m.def("pendulum_field", &oracle::Pendulum1D::sample_u, py::arg("grid"),
        "Closed-form weak KAM solution of the pendulum, sampled on the grid.");
}
