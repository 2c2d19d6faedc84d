import math

import numpy as np
import pytest

from pdmlab.catalog import catalog_lookup
from pdmlab.dynamics import IntegratorConfig, State, Trajectory, drift_of_series, reference_eom, total_energy_pdm
from pdmlab.errors import DomainError, ParameterError, UnsupportedError
from pdmlab.integrators import integrate
from pdmlab.invariants import (
    axis_factors,
    energy_formula,
    fundamental_integrals,
    invariant_series,
    isotropic_integrals,
    q_complex_isotonic,
    q_complex_linear,
    q_complex_shifted,
    q_jk,
    turning_point_energy,
    unwrapped_phase,
)
from pdmlab.models import Potential, ReferenceModel
from pdmlab.oracles import reference_isotonic_ep, reference_linear, reference_shifted

LINEAR_12 = ReferenceModel(Potential("harmonic", 1.0, (1, 2)))
ISOTROPIC = ReferenceModel(Potential("harmonic", 1.0, (1, 1)))
SHIFTED = ReferenceModel(Potential("shifted-harmonic", 1.0, (1, 1), shift=(0.5, -0.2)))


def closed_form_traj(sol, periods=10, n=2001):
    return Trajectory.from_closed_form(sol, np.linspace(0.0, periods * sol.period, n))


def test_q_complex_linear_examples():
    assert q_complex_linear(State((1, 0), (0, 0)), 1.0, 1) == 1j
    assert q_complex_linear(State((1, 0), (2, 0)), 3.0, 1) == 2 + 3j
    with pytest.raises(ParameterError):
        q_complex_linear(State((1, 0), (0, 0)), 1.0, 3)


def test_q_complex_shifted_examples():
    assert q_complex_shifted(State((-0.5, 0), (0, 0)), 2.0, 0.5, 1) == 0
    assert q_complex_shifted(State((1, 0), (1, 0)), 2.0, 0.5, 1) == 1 + 3j


def test_q_complex_isotonic_examples():
    assert q_complex_isotonic(State((1, 1), (0, 0)), 1.0, 1.0, 1) == 0
    with pytest.raises(DomainError):
        q_complex_isotonic(State((0.0, 1), (0, 0)), 1.0, 1.0, 1)


def test_q_jk_examples():
    assert q_jk(1j, 1j, 1, 1) == pytest.approx(1.0, abs=1e-15)
    assert q_jk(1 + 1j, 1j, 1, 2) == pytest.approx(2.0, abs=1e-15)
    assert q_jk(2.0, 1.0, 1.0, 3.0) == 8.0


def test_q_jk_rejects_non_integer_and_zero_negative():
    with pytest.raises(UnsupportedError):
        q_jk(1j, 1j, 1.5, 1)
    with pytest.raises(DomainError):
        q_jk(0j, 1j, 1, -1)


def test_q_jk_no_branch_cut():
    # crossing the negative real axis leaves Q^n continuous
    z = np.exp(1j * np.linspace(0.9 * math.pi, 1.1 * math.pi, 11))
    assert np.allclose(q_jk(z, 1.0, 1, 3), z**3, atol=1e-15)


def test_modulus_constant_along_linear_closed_form():
    sol = reference_linear((1.0, 0.5), (1.0, 2.0))
    traj = closed_form_traj(sol)
    q1 = q_complex_linear(traj, 1.0, 1)
    assert np.ptp(np.abs(q1)) <= 1e-10


def test_modulus_constant_along_shifted_closed_form():
    sol = reference_shifted((1.0, 0.5), (2.0, 2.0), 0.0, (0.5, -0.2))
    traj = closed_form_traj(sol)
    q1 = q_complex_shifted(traj, 2.0, 0.5, 1)
    assert np.ptp(np.abs(q1)) <= 1e-10


def test_q12_constant_along_commensurate_closed_form():
    traj = closed_form_traj(reference_linear((1.0, 0.5), (1.0, 2.0)))
    q1, q2 = axis_factors(traj, LINEAR_12)
    q12 = q_jk(q1, q2, 1, 2)
    assert np.ptp(np.abs(q12)) <= 1e-9
    assert np.ptp(unwrapped_phase(q12)) <= 1e-9


def test_fundamental_integral_examples():
    assert fundamental_integrals(State((0, 0), (0, 0)), ISOTROPIC) == (0.0, 0.0)
    assert fundamental_integrals(State((1, 0), (0, 0)), ISOTROPIC) == (1.0, 0.0)


@pytest.mark.parametrize("ref,sol", [
    (LINEAR_12, reference_linear((1.0, 0.5), (1.0, 2.0))),
    (SHIFTED, reference_shifted((1.0, 0.5), (1.0, 1.0), 0.0, (0.5, -0.2))),
], ids=["linear", "shifted"])
def test_fundamental_integrals_constant(ref, sol):
    traj = closed_form_traj(sol)
    for series in fundamental_integrals(traj, ref):
        assert drift_of_series(series).max_rel <= 1e-10


def test_integrals_equal_twice_axis_energy():
    rng = np.random.default_rng(7)
    for ref in (LINEAR_12, SHIFTED, ReferenceModel(Potential("isotonic", 1.0, (1, 2), iso=(0.75, 0.5)))):
        pot = ref.potential
        shift = np.asarray(pot.shift) if pot.family == "shifted-harmonic" else np.zeros(2)
        for _ in range(1000):
            q = rng.uniform(0.1, 2.0, 2) * rng.choice([-1, 1], 2)
            v = rng.normal(size=2)
            ints = fundamental_integrals(State(q, v), ref)
            for j in range(2):
                e_j = 0.5 * v[j] ** 2 + 0.5 * pot.omega[j] ** 2 * (q[j] + shift[j]) ** 2
                if pot.family == "isotonic":
                    e_j += 0.5 * pot.iso[j] / q[j] ** 2
                assert ints[j] == pytest.approx(2.0 * e_j, rel=1e-14, abs=1e-14)


def test_isotropic_integral_examples():
    assert isotropic_integrals(State((1, 1), (0, 0)), 1.0) == (1.0, 0.0)
    q = np.array([0.6, -0.3])
    w0 = 1.5
    _, i4 = isotropic_integrals(State(q, w0 * np.array([-q[1], q[0]])), w0)
    assert i4 == pytest.approx(w0**2 * (q @ q), rel=1e-14)


def test_isotropic_integrals_constant():
    traj = closed_form_traj(reference_linear((1.0, 0.5), (1.0, 1.0), (0.0, 0.4)))
    for series in isotropic_integrals(traj, 1.0):
        assert drift_of_series(series).max_rel <= 1e-10
    straj = closed_form_traj(reference_shifted((1.0, 0.5), (1.0, 1.0), (0.0, 0.4), (0.5, -0.2)))
    for series in isotropic_integrals(straj, 1.0, (0.5, -0.2)):
        assert drift_of_series(series).max_rel <= 1e-10


def test_isotropic_integrals_reject_anisotropic():
    with pytest.raises(UnsupportedError):
        isotropic_integrals(State((1, 1), (0, 0)), (1.0, 2.0))


def test_invariant_series_keys():
    traj = closed_form_traj(reference_linear((1.0, 0.5), (1.0, 1.0)), periods=1, n=50)
    assert set(invariant_series(ISOTROPIC, traj)) == {"I1", "I2", "I3", "I4", "absQ12", "argQ12"}
    traj12 = closed_form_traj(reference_linear((1.0, 0.5), (1.0, 2.0)), periods=1, n=50)
    assert set(invariant_series(LINEAR_12, traj12)) == {"I1", "I2", "absQ12", "argQ12"}


def test_isotonic_q_modulus_along_integrated_trajectory():
    ref = ReferenceModel(Potential("isotonic", 1.0, (1, 1), iso=(0.75, 0.5)))
    sol = reference_isotonic_ep((1.0, 1.0), (1.0, 1.0), (0.75, 0.5))
    traj = integrate(reference_eom(ref), sol.state(0.0), 10 * math.pi, IntegratorConfig(rtol=1e-12, atol=1e-12))
    for j in (1, 2):
        qj = q_complex_isotonic(traj, 1.0, ref.potential.iso[j - 1], j)
        assert drift_of_series(np.abs(qj)).max_rel <= 1e-8
        # Q_j rotates at twice the axis frequency
        phase = unwrapped_phase(qj) - 2.0 * traj.times
        assert np.ptp(phase) <= 1e-7


def test_energy_formula_examples():
    assert energy_formula("ml1", (0, 0), beta=0.1) == 0.0
    assert energy_formula("ml1", (1, 0), omega=1.0, sigma=1, beta=0.1) == pytest.approx(0.4545454545454545,
                                                                                      abs=1e-15)


def test_energy_formula_ml2_verbatim_is_a_domain_error_at_defaults():
    # 1 - xi^2 S = 1 - 4 * 1.25 < 0
    with pytest.raises(DomainError):
        energy_formula("ml2", (1, 0.5), omega=1.0, xi=2.0)
    assert energy_formula("ml2", (0.3, 0.1), omega=1.0, xi=2.0) == pytest.approx(4.0 / (1 - 0.4), rel=1e-15)


def test_energy_formula_ml2_differs_from_direct_energy():
    # reported as a discrepancy, never asserted equal
    pair = catalog_lookup("ml2", amplitude=(0.3, 0.1))
    direct = total_energy_pdm(pair.pdm, State((0.3, 0.1), (0.0, 0.0)))
    assert direct == pytest.approx(turning_point_energy("ml2", (0.3, 0.1), sigma=-1, beta=0.25, xi=2.0), rel=1e-14)
    assert abs(energy_formula("ml2", (0.3, 0.1), xi=2.0) - direct) > 1.0


def test_energy_formula_isotonic_sign_options():
    plus = energy_formula("isotonic-pdm", (1, 1), omegas=(1, 1), lam=0.1, Omega=math.sqrt(1.04), sign=1)
    minus = energy_formula("isotonic-pdm", (1, 1), omegas=(1, 1), lam=0.1, Omega=math.sqrt(1.04), sign=-1)
    assert plus != minus
    with pytest.raises(ParameterError):
        energy_formula("isotonic-pdm", (1, 1), lam=0.1)
    with pytest.raises(ParameterError):
        energy_formula("isotonic-pdm", (1, 1), lam=0.1, Omega=1.0, sign=0)


def test_energy_formula_domain_and_unknown_family():
    with pytest.raises(DomainError):
        energy_formula("ml1", (2, 0), sigma=-1, beta=0.25)
    with pytest.raises(ParameterError):
        energy_formula("ml9", (1, 0))


@pytest.mark.parametrize("family", ["ml1", "ml3"])
def test_energy_formula_matches_turning_point_energy(family):
    rng = np.random.default_rng(11)
    for _ in range(100):
        beta = float(rng.uniform(0.01, 0.5))
        omega = float(rng.uniform(0.5, 2.0))
        amp = tuple(float(a) for a in rng.uniform(-1.5, 1.5, 2))
        pair = catalog_lookup(family, beta=beta, omega=omega, amplitude=amp)
        x = np.asarray(amp) - (np.asarray(pair.params["gamma"]) if family == "ml3" else 0.0)
        direct = total_energy_pdm(pair.pdm, State(x, (0.0, 0.0)))
        assert energy_formula(family, amp, omega=omega, sigma=1, beta=beta) == pytest.approx(direct, rel=1e-12,
                                                                                          abs=1e-15)
