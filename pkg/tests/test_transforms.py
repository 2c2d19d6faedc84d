import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmlab.catalog import MODEL_NAMES, catalog_lookup, initial_state, model_period
from pdmlab.dynamics import IntegratorConfig, State, Trajectory, pdm_eom
from pdmlab.errors import MonotonicityError, NonInvertibleError, ParameterError
from pdmlab.integrators import integrate
from pdmlab.models import MassFunction
from pdmlab.oracles import pdm_ml1, pdm_ml2
from pdmlab.transforms import (
    TransformSpec,
    cumulative_simpson,
    f_factor,
    image_margin,
    invariance_residual,
    inverse_point_map,
    map_trajectory,
    point_map,
    point_map_partials,
    tau_of_t,
    velocity_map,
)

ML1_MASS = MassFunction("inverse-quadratic", 1, 0.1)
RADIAL = TransformSpec("radial-sqrt-m", ML1_MASS)
UNIT = TransformSpec("radial-sqrt-m", MassFunction("inverse-quadratic", 1, 0.0))


def test_f_factor_examples():
    assert f_factor(UNIT, (0.7, -0.2)) == 1.0
    x = (1.0, 1.0)
    assert f_factor(RADIAL, x) == pytest.approx(2.2 / 2.4, abs=1e-15)
    xi = TransformSpec("constant-xi", MassFunction("inverse-quadratic", -1, 0.25), xi=2.0)
    assert f_factor(xi, (1.0, 0.0)) == pytest.approx(1 / 3, abs=1e-15)


def test_point_map_examples():
    assert np.array_equal(point_map(UNIT, (0.3, -0.4)), [0.3, -0.4])
    assert np.allclose(point_map(RADIAL, (1.0, 1.0)), [0.912871, 0.912871], atol=1e-6)
    shifted = TransformSpec("radial-sqrt-m-shifted-q", ML1_MASS, eta=(0.3, 0.0))
    assert np.allclose(point_map(shifted, (1.0, 1.0)), [0.612871, 0.912871], atol=1e-6)


def test_velocity_map_examples():
    assert np.array_equal(velocity_map(RADIAL, (1.0, 1.0), (0.0, 0.0)), [0.0, 0.0])
    assert np.allclose(velocity_map(RADIAL, (1.0, 1.0), (1.0, 0.0)), [1 / math.sqrt(1.2), 0.0], atol=1e-15)
    assert np.array_equal(velocity_map(UNIT, (1.0, 1.0), (0.4, 0.1)), [0.4, 0.1])


def test_inverse_examples():
    assert np.array_equal(inverse_point_map(UNIT, (0.3, 0.2)), [0.3, 0.2])
    q = point_map(RADIAL, (1.0, 1.0))
    assert np.allclose(inverse_point_map(RADIAL, q), [1.0, 1.0], atol=1e-12)
    assert np.allclose(inverse_point_map(RADIAL, (0.912871, 0.912871)), [1.0, 1.0], atol=2e-6)
    with pytest.raises(NonInvertibleError):
        inverse_point_map(TransformSpec("constant-xi", MassFunction("inverse-quadratic", -1, 0.25), xi=2.0),
                          (1.0, 1.0))


def test_inverse_outside_image():
    ts = TransformSpec("radial-sqrt-m", MassFunction("inverse-quadratic", 1, 0.25))
    # q = x sqrt(m) stays below 1/sqrt(beta) = 2 for sigma = +1
    assert image_margin(ts, (1.9, 0.0)) > 0
    with pytest.raises(NonInvertibleError):
        inverse_point_map(ts, (2.1, 0.0))


@settings(max_examples=200, deadline=None)
@given(sigma=st.sampled_from([1, -1]), beta=st.floats(0.0, 0.5), r=st.floats(0.0, 1.0),
       th=st.floats(0.0, 2 * math.pi),
       family=st.sampled_from(["radial-sqrt-m", "radial-sqrt-m-shifted-q", "shifted-radius"]))
def test_round_trip_property(sigma, beta, r, th, family):
    center = (0.3, -0.2) if family == "shifted-radius" else (0.0, 0.0)
    ts = TransformSpec(family, MassFunction("inverse-quadratic", sigma, beta, center), eta=(0.5, 0.1))
    lim = min(math.sqrt(0.5 / beta), 2.0) if sigma < 0 and beta > 0 else 2.0
    x = np.array([r * lim * math.cos(th), r * lim * math.sin(th)]) + np.asarray(center)
    assert np.max(np.abs(inverse_point_map(ts, point_map(ts, x)) - x)) <= 1e-12


def test_partials_match_finite_differences():
    rng = np.random.default_rng(0)
    for ts in (RADIAL, TransformSpec("shifted-radius", MassFunction("inverse-quadratic", 1, 0.1, (-0.5, 0.0))),
               TransformSpec("constant-xi", MassFunction("inverse-quadratic", -1, 0.25), xi=2.0)):
        for _ in range(20):
            x = rng.uniform(-1.0, 1.0, 2)
            got = point_map_partials(ts, x)
            h = 1e-6
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                fd = (point_map(ts, x + e)[j] - point_map(ts, x - e)[j]) / (2 * h)
                assert got[j] == pytest.approx(fd, rel=1e-7, abs=1e-9)


def test_invariance_examples():
    grid = np.random.default_rng(1).uniform(-0.7, 0.7, (100, 2))
    assert invariance_residual(UNIT, grid) == 0.0
    assert invariance_residual(RADIAL, grid) <= 1e-12


def test_invariance_negative_control():
    # f = 1 with a beta = 0.1 point map: the identity must fail visibly
    grid = np.random.default_rng(2).uniform(-0.7, 0.7, (100, 2))
    ts = TransformSpec("radial-sqrt-m", ML1_MASS)
    partials = point_map_partials(ts, grid)
    from pdmlab.models import mass_value

    res = np.max(np.abs(partials.sum(axis=-1) - 2.0 * np.sqrt(mass_value(ML1_MASS, grid))))
    assert res >= 1e-2


def test_invariance_unknown_form():
    with pytest.raises(ParameterError):
        invariance_residual(RADIAL, [(0.1, 0.1)], "cubic")


def test_constant_xi_needs_deformation():
    with pytest.raises(MonotonicityError):
        TransformSpec("constant-xi", MassFunction("inverse-quadratic", -1, 0.0), xi=2.0)


def test_simpson_exact_for_quadratics_on_nonuniform_grid():
    t = np.sort(np.concatenate([[0.0, 2.0], np.random.default_rng(3).uniform(0.0, 2.0, 30)]))
    y = 1 + t - 3 * t**2
    exact = t + t**2 / 2 - t**3
    assert np.max(np.abs(cumulative_simpson(y, t) - exact)) <= 1e-12


def test_simpson_exact_for_cubics_at_even_nodes_of_uniform_grid():
    t = np.linspace(0.0, 2.0, 21)
    y = 1 + t - 3 * t**2 + t**3
    exact = t + t**2 / 2 - t**3 + t**4 / 4
    assert np.max(np.abs(cumulative_simpson(y, t)[::2] - exact[::2])) <= 1e-13


def test_simpson_two_points():
    assert np.allclose(cumulative_simpson(np.array([1.0, 3.0]), np.array([0.0, 2.0])), [0.0, 4.0])


def test_tau_identity_and_constant_state():
    ts = np.linspace(0.0, 3.0, 31)
    traj = Trajectory(ts, np.column_stack([np.cos(ts), np.sin(ts)]), np.column_stack([-np.sin(ts), np.cos(ts)]))
    assert np.array_equal(tau_of_t(traj, UNIT)[:, 1], ts - ts[0])
    fixed = Trajectory(ts, np.tile([0.6, 0.2], (31, 1)), np.zeros((31, 2)))
    tau = tau_of_t(fixed, RADIAL)
    assert np.max(np.abs(tau[:, 1] - f_factor(RADIAL, (0.6, 0.2)) * ts)) <= 1e-12


def test_tau_along_ml1_closed_form_against_refinement():
    sol = pdm_ml1((1.0, 0.5), 1.0, 1, 0.1)
    t_end = sol.period
    coarse = Trajectory.from_closed_form(sol, np.linspace(0, t_end, 401))
    fine = Trajectory.from_closed_form(sol, np.linspace(0, t_end, 801))
    tc = tau_of_t(coarse, RADIAL)[:, 1]
    tf = tau_of_t(fine, RADIAL)[:, 1]
    richardson = tf[::2] + (tf[::2] - tc) / 15.0
    assert np.all(np.diff(tc) > 0)
    steps = np.diff(tc)
    assert steps.max() / steps.min() < 2.0
    assert np.max(np.abs(tc - richardson)) <= 1e-9


def test_map_trajectory_identity():
    ts = np.linspace(0.0, 1.0, 11)
    x = np.column_stack([ts, 1 - ts])
    v = np.tile([1.0, -1.0], (11, 1))
    mapped = map_trajectory(Trajectory(ts, x, v), UNIT)
    assert np.array_equal(mapped.times, ts)
    assert np.array_equal(mapped.positions, x) and np.array_equal(mapped.velocities, v)


def test_map_ml2_orbit_modulus():
    # |q| = xi sqrt(m(r)) for both components; it varies with r along the cosine orbit
    pair = catalog_lookup("ml2")
    sol = pdm_ml2((1.0, 0.5), 1.0, -1, 0.25, 2.0)
    traj = Trajectory.from_closed_form(sol, np.linspace(0, sol.period, 400))
    mapped = map_trajectory(traj, pair.transform)
    mod = np.linalg.norm(mapped.positions, axis=1)
    from pdmlab.models import mass_value

    assert np.allclose(mod, 2.0 * np.sqrt(mass_value(pair.pdm.mass, traj.positions)), rtol=1e-14)
    assert mod.max() - mod.min() > 0.1


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_tau_monotone_and_image_margin_along_catalog_trajectories(name):
    pair = catalog_lookup(name)
    traj = integrate(pdm_eom(pair.pdm), initial_state(pair), 3 * model_period(pair), IntegratorConfig())
    tau = tau_of_t(traj, pair.transform)[:, 1]
    assert np.all(np.diff(tau) > 0)
    if pair.transform.is_radial:
        assert np.all(image_margin(pair.transform, point_map(pair.transform, traj.positions)) > 0)


def test_nonpositive_f_rejected():
    # constant-xi with sigma = +1 has m' < 0, so f < 0
    ts = TransformSpec("constant-xi", MassFunction("inverse-quadratic", 1, 0.25), xi=2.0)
    with pytest.raises(MonotonicityError):
        f_factor(ts, (0.5, 0.5))


def test_state_point_inputs():
    s = State((1.0, 1.0), (1.0, 0.0))
    assert np.allclose(velocity_map(RADIAL, s.position, s.velocity), [1 / math.sqrt(1.2), 0.0])
