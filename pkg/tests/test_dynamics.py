import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pdmlab.catalog import PDM_MODELS, catalog_lookup, initial_state, model_period
from pdmlab.dynamics import (
    DriftReport,
    IntegratorConfig,
    State,
    Trajectory,
    drift,
    el_residual,
    energy_series,
    pdm_acceleration,
    pdm_eom,
    reference_acceleration,
    reference_eom,
    sub_energy,
    total_energy_pdm,
)
from pdmlab.errors import ParameterError, StepLimitError, TruncatedTrajectoryError
from pdmlab.integrators import hermite, integrate
from pdmlab.models import MassFunction, PdmModel, Potential, ReferenceModel, mass_value

ML1 = catalog_lookup("ml1").pdm
HARMONIC = PdmModel(MassFunction("constant"), Potential("harmonic"))
RK45 = IntegratorConfig(rtol=1e-10, atol=1e-10)


def test_pdm_acceleration_examples():
    assert np.allclose(pdm_acceleration(HARMONIC, State((1.0, 0.0), (0.0, 0.0))), [-1.0, 0.0])
    assert np.allclose(pdm_acceleration(ML1, State((1.0, 0.0), (0.0, 0.0))), [-1 / 1.1, 0.0], atol=1e-15)


@pytest.mark.parametrize("name", PDM_MODELS)
def test_acceleration_satisfies_el_equation(name):
    model = catalog_lookup(name).pdm
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = rng.uniform(0.3, 1.0, 2) * rng.choice([-1, 1], 2)
        v = rng.normal(size=2)
        a = pdm_acceleration(model, State(x, v))
        assert np.max(np.abs(el_residual(model, x, v, a))) <= 1e-12


@pytest.mark.parametrize("name", PDM_MODELS)
def test_fast_eom_matches_state_path(name):
    model = catalog_lookup(name).pdm
    eom = pdm_eom(model)
    rng = np.random.default_rng(8)
    for _ in range(50):
        x = rng.uniform(0.3, 1.0, 2)
        v = rng.normal(size=2)
        assert np.allclose(eom(x, v), pdm_acceleration(model, State(x, v)), rtol=1e-13, atol=1e-14)


def _symbolic_acceleration(kind):
    """Accelerations from the Lagrangian m |x'|^2 / 2 - V by symbolic Euler-Lagrange equations."""
    x1, x2, v1, v2, s, b, w, c1, c2, xi, l, b1, b2 = sp.symbols("x1 x2 v1 v2 s b w c1 c2 xi l b1 b2", real=True)
    t = sp.Symbol("t")
    X1, X2 = sp.Function("X1")(t), sp.Function("X2")(t)
    if kind == "harmonic":
        rs2 = (X1 - c1) ** 2 + (X2 - c2) ** 2
        m = 1 / (1 + s * b * rs2)
        V = m * w**2 * rs2 / 2
    elif kind == "constant":
        m = 1 / (1 + s * b * (X1**2 + X2**2))
        V = m * w**2 * xi**2 / 2
    else:
        m = 1 / (1 + s * l * (X1**2 + X2**2))
        V = (m * (w**2 * X1**2 + 4 * w**2 * X2**2) + (b1 / X1**2 + b2 / X2**2) / m) / 2
    L = m * (X1.diff(t) ** 2 + X2.diff(t) ** 2) / 2 - V
    eqs = [sp.diff(L.diff(X.diff(t)), t) - L.diff(X) for X in (X1, X2)]
    acc = sp.symbols("a1 a2")
    subs = {X1.diff(t, 2): acc[0], X2.diff(t, 2): acc[1]}
    eqs = [e.subs(subs) for e in eqs]
    subs = {X1.diff(t): v1, X2.diff(t): v2}
    eqs = [e.subs(subs).subs({X1: x1, X2: x2}) for e in eqs]
    sol = sp.solve(eqs, acc, dict=True)[0]
    args = (x1, x2, v1, v2, s, b, w, c1, c2, xi, l, b1, b2)
    return sp.lambdify(args, [sol[acc[0]], sol[acc[1]]], "math")


@pytest.mark.parametrize("name,kind", [("ml1", "harmonic"), ("ml3", "harmonic"), ("ml2", "constant"),
                                       ("isotonic-pdm", "isotonic")])
def test_acceleration_matches_symbolic_lagrangian(name, kind):
    pair = catalog_lookup(name)
    if name == "isotonic-pdm":
        pair = catalog_lookup(name, n2=2)
    p = pair.params
    fn = _symbolic_acceleration(kind)
    mass = pair.pdm.mass
    rng = np.random.default_rng(9)
    for _ in range(20):
        x = rng.uniform(0.3, 1.0, 2)
        v = rng.normal(size=2)
        got = pdm_acceleration(pair.pdm, State(x, v))
        ref = fn(x[0], x[1], v[0], v[1], mass.sigma, mass.beta, p["omega"], mass.center[0], mass.center[1],
                 p.get("xi", 0.0), mass.beta, p.get("beta1", 0.0), p.get("beta2", 0.0))
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-13)


def test_reference_acceleration_examples():
    free = ReferenceModel(Potential("harmonic", 0.0))
    assert np.array_equal(reference_acceleration(free, State((0.3, 0.1), (1.0, 2.0))), [0.0, 0.0])
    harm = ReferenceModel(Potential("harmonic", 1.0, (1, 2)))
    assert np.allclose(reference_acceleration(harm, State((1.0, 1.0), (0.0, 0.0))), [-1.0, -4.0])
    iso = ReferenceModel(Potential("isotonic", 1.0, iso=(0.75, 0.75)))
    assert reference_acceleration(iso, State((1.0, 1.0), (0.0, 0.0)))[0] == pytest.approx(-0.25)


def test_energy_examples():
    assert total_energy_pdm(HARMONIC, State((0.0, 0.0), (0.0, 0.0))) == 0.0
    assert total_energy_pdm(ML1, State((1.0, 0.0), (0.0, 0.0))) == pytest.approx(0.4545454545, abs=1e-10)


def test_sub_energies_add_up_for_separable():
    s = State((0.4, -0.3), (0.2, 0.9))
    assert sub_energy(HARMONIC, s, 1) + sub_energy(HARMONIC, s, 2) == pytest.approx(total_energy_pdm(HARMONIC, s),
                                                                                    abs=1e-15)


def test_sub_energy_constant_at_zero_beta():
    pair = catalog_lookup("ml1", beta=0.0)
    traj = integrate(pdm_eom(pair.pdm), initial_state(pair), 10 * model_period(pair), RK45)
    rep = drift(traj, {"E_x1": lambda s: sub_energy(pair.pdm, s, 1)})
    assert rep["E_x1"].max_rel <= 1e-8


def test_sub_energy_varies_over_one_period():
    pair = catalog_lookup("ml1")
    traj = integrate(pdm_eom(pair.pdm), initial_state(pair), model_period(pair), RK45)
    rep = drift(traj, {"E_x1": lambda s: sub_energy(pair.pdm, s, 1),
                       "E_tot": lambda s: total_energy_pdm(pair.pdm, s)})
    assert rep["E_x1"].max_rel >= 1e-2
    assert rep["E_tot"].max_rel <= 1e-8


def test_drift_examples():
    traj = Trajectory(np.array([0.0, 1.0, 2.0]), np.zeros((3, 2)), np.zeros((3, 2)))
    rep = drift(traj, {"one": lambda s: 1.0})
    assert isinstance(rep, DriftReport)
    assert rep["one"].max_abs == 0.0 and rep["one"].max_rel == 0.0
    with pytest.raises(ParameterError):
        drift(Trajectory(np.array([0.0]), np.zeros((1, 2)), np.zeros((1, 2)), strict=False), {"one": lambda s: 1.0})


def test_trajectory_invariants():
    with pytest.raises(ParameterError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 2)), np.zeros((2, 2)))


@pytest.mark.parametrize("name", PDM_MODELS + ("linear-ref", "isotonic-ref"))
def test_energy_conservation_every_model(name):
    if name.endswith("-ref"):
        pair = catalog_lookup(name[:-4])
        model = PdmModel(MassFunction("constant"), pair.reference.potential)
    else:
        pair = catalog_lookup(name)
        model = pair.pdm
    traj = integrate(pdm_eom(model), initial_state(pair), 10 * model_period(pair), RK45)
    e = energy_series(model, traj.positions, traj.velocities)
    assert np.max(np.abs(e - e[0])) / abs(e[0]) <= 1e-8


# integrators

def test_harmonic_full_period():
    traj = integrate(pdm_eom(HARMONIC), State((1.0, 0.0), (0.0, 0.0)), 2 * math.pi, RK45)
    assert np.allclose(traj.final.position, [1.0, 0.0], atol=1e-8)
    assert traj.meta["method"] == "adaptive-rk45" and traj.meta["accepted"] > 0


def test_ml1_period_return():
    big = math.sqrt(1 / 1.1)
    traj = integrate(pdm_eom(ML1), State((1.0, 0.0), (0.0, 0.0)), 2 * math.pi / big, RK45)
    assert np.allclose(traj.final.position, [1.0, 0.0], atol=1e-6)
    assert np.allclose(traj.final.velocity, [0.0, 0.0], atol=1e-6)


def test_domain_exit_truncates_fixed_step():
    # a fixed step from just inside beta r^2 = 1 overshoots the ring
    model = catalog_lookup("ml1", sign="-", beta=0.25, amplitude=(0.5, 0.0)).pdm
    with pytest.raises(TruncatedTrajectoryError) as exc:
        integrate(pdm_eom(model), State((1.99, 0.0), (5.0, 0.0)), 10.0, IntegratorConfig("fixed-rk4", h=0.1))
    assert len(exc.value.partial) >= 1
    assert np.all(0.25 * (exc.value.partial.positions**2).sum(axis=1) < 1.0)


def test_domain_exit_truncates_adaptive():
    mass = MassFunction("inverse-quadratic", -1, 0.25)

    def outward(x, v, t=0.0):
        mass_value(mass, x)
        return np.array([1.0, 0.0])

    with pytest.raises(TruncatedTrajectoryError) as exc:
        integrate(outward, State((1.9, 0.0), (0.5, 0.0)), 10.0, RK45)
    part = exc.value.partial
    assert part.positions[-1, 0] < 2.0 and part.positions[-1, 0] > 1.99


def test_unit_mass_free_motion_toward_the_ring_stays_inside():
    # the diverging mass brakes a force-free particle before it reaches the ring
    model = PdmModel(MassFunction("inverse-quadratic", -1, 0.25), Potential("harmonic", 0.0))
    traj = integrate(pdm_eom(model), State((1.9, 0.0), (1.0, 0.0)), 10.0, RK45)
    assert np.all(0.25 * (traj.positions**2).sum(axis=1) < 1.0)


def test_isotonic_singularity_truncates():
    # an attractive barrier (beta_1 < 0) pulls q_1 into the singularity in finite time
    ref = ReferenceModel(Potential("isotonic", 1.0, iso=(-0.5, 0.5)))
    with pytest.raises(TruncatedTrajectoryError) as exc:
        integrate(reference_eom(ref), State((0.5, 1.0), (-0.5, 0.0)), 5.0, RK45)
    assert np.all(np.abs(exc.value.partial.positions[:, 0]) > 0)


def test_step_limit():
    with pytest.raises(StepLimitError) as exc:
        integrate(pdm_eom(HARMONIC), State((1.0, 0.0), (0.0, 0.0)), 100.0, IntegratorConfig(max_steps=10))
    assert exc.value.partial is not None


def test_rk4_order():
    errors = []
    for h in (1e-2, 5e-3, 2.5e-3):
        cfg = IntegratorConfig("fixed-rk4", h=h)
        traj = integrate(pdm_eom(HARMONIC), State((1.0, 0.0), (0.0, 0.0)), 2.0, cfg)
        exact = np.array([math.cos(2.0), 0.0])
        errors.append(float(np.max(np.abs(traj.final.position - exact))))
    slopes = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert all(abs(p - 4.0) <= 0.2 for p in slopes), slopes


def test_rk4_time_reversibility():
    cfg = IntegratorConfig("fixed-rk4", h=1e-3)
    s0 = State((1.0, 0.3), (0.2, -0.5))
    fwd = integrate(pdm_eom(HARMONIC), s0, 5.0, cfg).final
    back = integrate(pdm_eom(HARMONIC), State(fwd.position, -fwd.velocity, 0.0), 5.0, cfg).final
    assert np.allclose(back.position, s0.position, atol=1e-6)
    assert np.allclose(-back.velocity, s0.velocity, atol=1e-6)


def test_uniform_output_grid():
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-10, output_dt=0.01)
    traj = integrate(pdm_eom(HARMONIC), State((1.0, 0.0), (0.0, 0.0)), 1.0, cfg)
    assert np.allclose(np.diff(traj.times), 0.01)
    assert traj.times[-1] == 1.0
    assert np.max(np.abs(traj.positions[:, 0] - np.cos(traj.times))) <= 1e-9


def test_fixed_rk4_dense_output():
    cfg = IntegratorConfig("fixed-rk4", h=1e-3, output_dt=0.05)
    traj = integrate(pdm_eom(HARMONIC), State((1.0, 0.0), (0.0, 0.0)), 2.0, cfg)
    assert np.max(np.abs(traj.positions[:, 0] - np.cos(traj.times))) <= 1e-10


def test_hermite_exact_for_cubics():
    ts = np.array([0.0, 1.0, 2.5])
    ys = np.column_stack([ts**3, ts**2])
    fs = np.column_stack([3 * ts**2, 2 * ts])
    t_out = np.linspace(0, 2.5, 11)
    assert np.allclose(hermite(ts, ys, fs, t_out), np.column_stack([t_out**3, t_out**2]), atol=1e-13)


@pytest.mark.parametrize("name", ["ml1", "ml2", "isotonic-pdm"])
def test_agrees_with_scipy(name):
    pair = catalog_lookup(name)
    eom = pdm_eom(pair.pdm)
    init = initial_state(pair)
    t_end = 5 * model_period(pair)
    traj = integrate(eom, init, t_end, RK45)

    def rhs(t, y):
        return np.concatenate([y[2:], eom(y[:2], y[2:], t)])

    ref = solve_ivp(rhs, (0.0, t_end), init.vector, method="DOP853", rtol=1e-12, atol=1e-12, t_eval=traj.times)
    assert np.max(np.abs(ref.y[:2].T - traj.positions)) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(beta=st.floats(0.0, 0.3), a1=st.floats(0.1, 1.0), a2=st.floats(-1.0, 1.0))
def test_energy_conserved_for_random_starts(beta, a1, a2):
    pair = catalog_lookup("ml1", beta=beta)
    traj = integrate(pdm_eom(pair.pdm), State((a1, a2), (0.0, 0.3)), 10.0, RK45)
    e = energy_series(pair.pdm, traj.positions, traj.velocities)
    assert np.max(np.abs(e - e[0])) <= 1e-8 * abs(e[0])
