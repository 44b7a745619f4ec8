"""End-to-end smoke tests for the python surface at small grid sizes."""

import math

import pytest

import wkam


def test_grid_basics():
    g = wkam.Grid(2, 32)
    assert g.dim == 2 and g.n == 32
    assert g.h == pytest.approx(1.0 / 32)
    assert g.size == 32 * 32
    assert g.point(g.node(4, 7)) == pytest.approx([4 / 32, 7 / 32])


def test_pendulum_critical_value_and_solution():
    sys1 = wkam.pendulum(1024)
    est = wkam.estimate_critical_value(sys1)
    assert abs(est["c"]) <= 0.02

    u, info = wkam.solve_critical(sys1, 0.0)
    assert info["residual_max"] <= 0.02
    # closed form: u(1/2) = 2/pi
    assert u.interp([0.5, 0.0]) == pytest.approx(2.0 / math.pi, abs=5.0 / 1024)


def test_magnetic_1d_critical_value():
    est = wkam.estimate_critical_value(wkam.magnetic_1d(1024, a=1.0))
    assert est["c"] == pytest.approx(0.5, abs=0.02)
    assert est["c"] >= est["loop_bound"] - 0.02


def test_singular_set_and_fan_on_torus_distance():
    n = 64
    tsys = wkam.torus_eikonal(n)
    u = wkam.eikonal_distance(tsys, [tsys.grid.node(0, 0)])
    ss = wkam.singular_set(u, tsys, 0.5)
    assert len(ss["singular_nodes"]) > 0
    # detected nodes hug the cut lines x = 1/2, y = 1/2
    for node in ss["singular_nodes"][::25]:
        x = tsys.grid.point(node)
        off = min(abs(x[0] - 0.5), abs(x[1] - 0.5))
        assert off <= 3.0 / n

    fan = wkam.gradient_fan(u, tsys, 0.5, [0.5, 0.25])
    assert len(fan["reachable"]) == 2
    assert fan["p_sharp"][0] == pytest.approx(0.0, abs=0.05)
    assert fan["p_sharp"][1] == pytest.approx(0.447214, abs=0.05)
    assert fan["indicator"] > ss["delta_sing"]


def test_flow_stays_singular_and_g2_matches_g1():
    n = 64
    h = 1.0 / n
    tsys = wkam.torus_eikonal(n)
    u = wkam.eikonal_distance(tsys, [tsys.grid.node(0, 0)])
    g1 = wkam.integrate_g1(u, tsys, 0.5, [0.5, 0.25], 0.05, h / 2, fan_radius=4 * h)
    assert g1["status"] == "completed"
    assert wkam.min_indicator(g1) > 0.1
    # flat metric, constant f: g2 is g1 up to uniform time scaling
    g2 = wkam.integrate_g2(u, tsys, 0.5, [0.5, 0.25], 0.05, h / 2, fan_radius=4 * h)
    assert g2["status"] == "completed"
    # the trajectory rides the cut line x = 1/2
    for p in g1["points"]:
        assert p[0] == pytest.approx(0.5, abs=2 * h)


def test_mollified_flow_and_psi_decay():
    n = 64
    h = 1.0 / n
    tsys = wkam.torus_eikonal(n)
    u = wkam.torus_distance_field(tsys.grid)
    um = wkam.mollify(u, 16)
    traj = wkam.smooth_flow(um, tsys, "riemannian", 0.5, [0.5, 0.25], 0.1, h / 2)
    assert traj["status"] == "completed"
    tr = wkam.psi_track(um, tsys, "riemannian", 0.5, traj, 16)
    assert tr["fit_ok"]
    assert tr["psi"][0] < -0.4  # starts well inside the kink band


def test_hessian_checks_riemannian():
    tsys = wkam.torus_eikonal(64)
    u = wkam.torus_distance_field(tsys.grid)
    rep = wkam.hessian_checks(u, tsys, "riemannian", 0.5, n_samples=100)
    assert rep["usable"] > 0
    assert rep["defect_max"] <= 0.05


def test_path_action_dominates_solution_increments():
    sys1 = wkam.pendulum(1024)
    u, _ = wkam.solve_critical(sys1, 0.0)
    x, y = [0.1, 0.0], [0.4, 0.0]
    action = wkam.path_action(sys1, [x, [0.2, 0.0], [0.3, 0.0], y], 0.3)
    assert u.interp(y) - u.interp(x) <= action + 1e-3

    bf = wkam.brute_force_action(sys1, x, y, 0.3)
    assert bf <= action + 1e-3


def test_custom_system_roundtrip():
    g = wkam.Grid(1, 64)
    pot = [-(1.0 - math.cos(2.0 * math.pi * g.point(i)[0])) for i in range(g.size)]
    sys1 = wkam.system(1, 64, pot, omega=[0.3, 0.0])
    assert sys1.potential([0.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    est = wkam.estimate_critical_value(sys1)
    assert est["c"] >= est["loop_bound"] - 0.02
