"""Weak KAM toolkit on flat tori.

Critical values, weak KAM solutions, singular set extraction, and the
generalized gradient flows that propagate singularities, backed by the C++
core.
"""

from wkam._core import (
    Grid,
    ScalarField,
    System,
    brute_force_action,
    eikonal_distance,
    estimate_critical_value,
    gradient_fan,
    hessian_checks,
    integrate_g1,
    integrate_g2,
    magnetic_1d,
    magnetic_2d,
    min_indicator,
    mollify,
    path_action,
    pendulum,
    pendulum_field,
    psi_track,
    singular_set,
    smooth_flow,
    solve_critical,
    system,
    torus_distance_field,
    torus_eikonal,
)

__all__ = [
    "Grid",
    "ScalarField",
    "System",
    "brute_force_action",
    "eikonal_distance",
    "estimate_critical_value",
    "gradient_fan",
    "hessian_checks",
    "integrate_g1",
    "integrate_g2",
    "magnetic_1d",
    "magnetic_2d",
    "min_indicator",
    "mollify",
    "path_action",
    "pendulum",
    "pendulum_field",
    "psi_track",
    "singular_set",
    "smooth_flow",
    "solve_critical",
    "system",
    "torus_distance_field",
    "torus_eikonal",
]
