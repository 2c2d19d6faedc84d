"""Closed-form trajectories, the ODE residual referee and oracle-vs-integrator runs.

Two shapes cover every family: a (shifted) cosine and a square root of a
shifted sine. Both provide analytic position, velocity and acceleration.
Frequencies, phases and amplitudes are per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DriftReport, IntegratorConfig, QuantityDrift, State, Trajectory
from .errors import ConfigError, ParameterError, WindowError

DELTA_MIN = 1e-6


def _pair(v):
    return np.broadcast_to(np.asarray(v, dtype=float), (2,)).copy()


def _floats(v):
    return tuple(float(x) for x in _pair(v))


def _columns(t, fn):
    t = np.asarray(t, dtype=float)
    out = np.stack([fn(t, j) for j in range(2)], axis=-1)
    return out


@dataclass(frozen=True)
class ClosedFormSolution:
    """Shared interface: ``position``, ``velocity``, ``acceleration`` and a validity window."""

    family: str
    params: dict = field(default_factory=dict, compare=False)
    validity: tuple[float, float] = (-math.inf, math.inf)

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def acceleration(self, t):
        raise NotImplementedError

    def state(self, t) -> State:
        t = float(t)
        return State(self.position(t), self.velocity(t), t)

    @property
    def period(self) -> float:
        raise NotImplementedError

    def default_window(self, periods: float = 10.0) -> tuple[float, float]:
        """The validity window if finite, else ``[0, periods * period]``."""
        lo, hi = self.validity
        if math.isfinite(lo) and math.isfinite(hi):
            return lo, hi
        return 0.0, periods * self.period

    def check_window(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.validity
        if np.any(t < lo) or np.any(t > hi):
            raise WindowError(f"closed form {self.family} is only defined on [{lo:.6g}, {hi:.6g}]")


@dataclass(frozen=True)
class CosineSolution(ClosedFormSolution):
    """``x_j = A_j cos(w_j t + phi_j) + c_j``."""

    amplitude: tuple = (1.0, 0.0)
    frequency: tuple = (1.0, 1.0)
    phase: tuple = (0.0, 0.0)
    offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        for name in ("amplitude", "frequency", "phase", "offset"):
            object.__setattr__(self, name, _floats(getattr(self, name)))

    def _arg(self, t, j):
        return self.frequency[j] * t + self.phase[j]

    def position(self, t):
        return _columns(t, lambda t, j: self.amplitude[j] * np.cos(self._arg(t, j)) + self.offset[j])

    def velocity(self, t):
        # + 0.0 turns a signed zero at the turning point into 0.0
        return _columns(t, lambda t, j: 0.0 - self.amplitude[j] * self.frequency[j] * np.sin(self._arg(t, j)))

    def acceleration(self, t):
        return _columns(t, lambda t, j: -self.amplitude[j] * self.frequency[j] ** 2 * np.cos(self._arg(t, j)))

    @property
    def period(self) -> float:
        w = min(abs(f) for f in self.frequency)
        if w == 0:
            raise ParameterError("zero frequency has no period")
        return 2.0 * math.pi / w


@dataclass(frozen=True)
class RootSineSolution(ClosedFormSolution):
    """``x_j = sqrt(b_j + a_j sin(nu_j t + delta_j))``.

    The validity window is the interval containing ``t=0`` (or the first one
    after it) on which every radicand satisfies ``b + a sin >= |a| delta_min``.
    """

    base: tuple = (0.0, 0.0)
    coef: tuple = (1.0, 1.0)
    frequency: tuple = (1.0, 1.0)
    phase: tuple = (0.0, 0.0)
    delta_min: float = DELTA_MIN

    def __post_init__(self):
        for name in ("base", "coef", "frequency", "phase"):
            object.__setattr__(self, name, _floats(getattr(self, name)))
        if any(f <= 0 for f in self.frequency):
            raise ParameterError("root-sine frequencies must be positive")
        object.__setattr__(self, "validity", self._window())

    def _axis_window(self, j):
        b, a, nu, d = self.base[j], self.coef[j], self.frequency[j], self.phase[j]
        if a == 0:
            if b > 0:
                return -math.inf, math.inf
            raise WindowError("radicand is never positive")
        if a < 0:
            a, d = -a, d + math.pi
        s_min = self.delta_min - b / a
        if s_min <= -1.0:
            return -math.inf, math.inf
        if s_min >= 1.0:
            raise WindowError("radicand never reaches the validity floor")
        lo_arg = math.asin(s_min)
        hi_arg = math.pi - lo_arg
        # lobe k spans [lo_arg + 2 pi k, hi_arg + 2 pi k] in argument space
        k = math.ceil((d - hi_arg) / (2 * math.pi))
        lo = (lo_arg + 2 * math.pi * k - d) / nu
        hi = (hi_arg + 2 * math.pi * k - d) / nu
        return float(lo), float(hi)

    def _window(self):
        w = [self._axis_window(j) for j in range(2)]
        lo, hi = max(w[0][0], w[1][0]), min(w[0][1], w[1][1])
        if not lo < hi:
            raise WindowError("the per-axis validity windows do not overlap")
        return float(lo), float(hi)

    def _arg(self, t, j):
        return self.frequency[j] * t + self.phase[j]

    def _radicand(self, t, j):
        return self.base[j] + self.coef[j] * np.sin(self._arg(t, j))

    def position(self, t):
        self.check_window(t)
        return _columns(t, lambda t, j: np.sqrt(self._radicand(t, j)))

    def velocity(self, t):
        self.check_window(t)

        def v(t, j):
            x = np.sqrt(self._radicand(t, j))
            return self.coef[j] * self.frequency[j] * np.cos(self._arg(t, j)) / (2.0 * x)

        return _columns(t, v)

    def acceleration(self, t):
        self.check_window(t)

        def a(t, j):
            r = self._radicand(t, j)
            x = np.sqrt(r)
            nu, c = self.frequency[j], self.coef[j]
            v = c * nu * np.cos(self._arg(t, j)) / (2.0 * x)
            r_dd = -c * nu**2 * np.sin(self._arg(t, j))
            return (r_dd - 2.0 * v * v) / (2.0 * x)

        return _columns(t, a)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / min(self.frequency)


def _positive_sq(w2, what):
    if not (np.isfinite(w2) and w2 > 0):
        raise ParameterError(f"{what}: Omega^2 = {w2!r} is not positive")
    return math.sqrt(w2)


def _amp_sq(A):
    A = _pair(A)
    return float(A @ A)


def reference_linear(A, omega, phi=0.0) -> CosineSolution:
    """``q_j = A_j cos(w_j tau + phi_j)`` of the unit-mass oscillator."""
    return CosineSolution("reference-linear", {"A": _floats(A), "omega": _floats(omega)},
                          amplitude=A, frequency=omega, phase=phi)


def reference_shifted(A, alpha, phi=0.0, eta=(0.0, 0.0)) -> CosineSolution:
    """``q_j = A_j cos(a_j tau + phi_j) - eta_j``."""
    return CosineSolution("reference-shifted", {"A": _floats(A), "alpha": _floats(alpha),
                                                "eta": _floats(eta)},
                          amplitude=A, frequency=alpha, phase=phi, offset=-_pair(eta))


def reference_isotonic_verbatim(A, omega, delta=math.pi / 2, delta_min=DELTA_MIN) -> RootSineSolution:
    """``q_j = sqrt((A_j / w_j) sin(w_j tau + d_j))`` with ``b_j = -A_j^2``, as printed.

    Its residual is reported as a diagnostic; it is not an exact solution.
    """
    A, w = _pair(A), _pair(omega)
    return RootSineSolution("reference-isotonic-verbatim",
                            {"A": _floats(A), "omega": _floats(w), "beta": _floats(-A**2)},
                            base=(0.0, 0.0), coef=A / w, frequency=w, phase=delta, delta_min=delta_min)


def reference_isotonic_ep(E, omega, beta, delta=0.0, delta_min=DELTA_MIN) -> RootSineSolution:
    """Exact Ermakov-Pinney orbit ``q_j = sqrt(E_j/w_j^2 + C_j sin(2 w_j tau + d_j))``.

    ``C_j = sqrt(E_j^2 - w_j^2 b_j) / w_j^2`` and ``E_j`` is the axis energy.
    """
    E, w, b = _pair(E), _pair(omega), _pair(beta)
    disc = E**2 - w**2 * b
    if np.any(disc < 0) or np.any(w <= 0):
        raise ParameterError("Ermakov-Pinney orbit needs w_j > 0 and E_j^2 >= w_j^2 b_j")
    C = np.sqrt(disc) / w**2
    return RootSineSolution("reference-isotonic-ep",
                            {"E": _floats(E), "omega": _floats(w), "beta": _floats(b), "C": _floats(C)},
                            base=E / w**2, coef=C, frequency=2.0 * w, phase=delta, delta_min=delta_min)


def ml1_frequency_sq(A, omega, sigma, beta) -> float:
    return omega**2 / (1.0 + sigma * beta * _amp_sq(A))


def pdm_ml1(A, omega=1.0, sigma=1, beta=0.1, phi=0.0) -> CosineSolution:
    """``x_j = A_j cos(W t + phi)`` with ``W^2 = w^2 / (1 + sigma beta |A|^2)``."""
    den = 1.0 + sigma * beta * _amp_sq(A)
    if not den > 0:
        raise ParameterError("1 + sigma*beta*|A|^2 must be positive")
    big = _positive_sq(omega**2 / den, "ml1")
    return CosineSolution("pdm-ml1", {"A": _floats(A), "omega": omega, "sigma": sigma, "beta": beta,
                                      "Omega": big}, amplitude=A, frequency=big, phase=phi)


def ml2_frequency_sq(A, omega, sigma, beta, xi, form="general") -> float:
    """``-sigma w^2 beta xi^2 / (1 + sigma beta |A|^2)``; ``form="boxed"`` gives ``w^2 / (1 + sigma beta |A|^2)``.

    The two coincide when ``beta = -sigma / xi^2`` read with ``beta >= 0``, i.e. sigma = -1 and beta = 1/xi^2.
    """
    den = 1.0 + sigma * beta * _amp_sq(A)
    if not den > 0:
        raise ParameterError("1 + sigma*beta*|A|^2 must be positive")
    if form == "general":
        return -sigma * omega**2 * beta * xi**2 / den
    if form == "boxed":
        return omega**2 / den
    raise ParameterError(f"unknown ml2 frequency form {form!r}")


def pdm_ml2(A, omega=1.0, sigma=-1, beta=0.25, xi=2.0, phi=0.0, form="general") -> CosineSolution:
    """Cosine orbit of the PDM particle in the mass-scaled constant potential."""
    big = _positive_sq(ml2_frequency_sq(A, omega, sigma, beta, xi, form), "ml2")
    return CosineSolution("pdm-ml2", {"A": _floats(A), "omega": omega, "sigma": sigma, "beta": beta,
                                      "xi": xi, "Omega": big, "form": form},
                          amplitude=A, frequency=big, phase=phi)


def pdm_ml3(A, omega=1.0, sigma=1, beta=0.1, gamma=(0.5, 0.0), phi=0.0) -> CosineSolution:
    """``x_j = A_j cos(W t + phi) - gamma_j``, ML-I frequency."""
    den = 1.0 + sigma * beta * _amp_sq(A)
    if not den > 0:
        raise ParameterError("1 + sigma*beta*|A|^2 must be positive")
    big = _positive_sq(omega**2 / den, "ml3")
    return CosineSolution("pdm-ml3", {"A": _floats(A), "omega": omega, "sigma": sigma, "beta": beta,
                                      "gamma": _floats(gamma), "Omega": big},
                          amplitude=A, frequency=big, phase=phi, offset=-_pair(gamma))


ISOTONIC_CASES = ("isotropic", "anisotropic", "equal-beta")


def _isotonic_case_matches(case, omegas, iso, A):
    w1, w2 = omegas
    b1, b2 = iso
    if case == "isotropic":
        return w1 == w2 and b1 != b2
    if case == "anisotropic":
        return w1 != w2 and b1 != b2
    return w1 != w2 and b1 == b2 and A[0] == A[1]


def isotonic_frequency_sq(A, omegas, lam, iso, case="auto"):
    """Frequency table of the PDM-isotonic family; returns ``(Omega^2, case)``.

    Rows: isotropic ``w^2 + lam^2 (A_1 + A_2)^2``; anisotropic
    ``(A_1 w_1^2 + A_2 w_2^2 + lam^2 (A_1 + A_2)^3) / (A_1 + A_2)``;
    equal-beta ``(w_1^2 + w_2^2) / (16 A^2 lam^2)``. ``case="auto"`` picks
    the unique row whose conditions match; anything else must match too.
    """
    A, w, b = _pair(A), _pair(omegas), _pair(iso)
    matching = [c for c in ISOTONIC_CASES if _isotonic_case_matches(c, w, b, A)]
    if case == "auto":
        if len(matching) != 1:
            raise ConfigError(f"isotonic frequency case is ambiguous or undefined for omega={_floats(w)}, "
                              f"beta={_floats(b)}, A={_floats(A)}; matching rows: {matching}")
        case = matching[0]
    elif case not in ISOTONIC_CASES:
        raise ConfigError(f"case must be one of {ISOTONIC_CASES} or 'auto', got {case!r}")
    elif case not in matching:
        raise ConfigError(f"case {case!r} does not match omega={_floats(w)}, beta={_floats(b)}, A={_floats(A)}")
    s = A[0] + A[1]
    if case == "isotropic":
        w2 = w[0] ** 2 + lam**2 * s**2
    elif case == "anisotropic":
        if s == 0:
            raise ParameterError("A_1 + A_2 must be non-zero")
        w2 = (A[0] * w[0] ** 2 + A[1] * w[1] ** 2 + lam**2 * s**3) / s
    else:
        if lam == 0:
            raise ParameterError("equal-beta row is undefined at lambda = 0")
        w2 = (w[0] ** 2 + w[1] ** 2) / (16.0 * A[0] ** 2 * lam**2)
    return float(w2), case


def pdm_isotonic_verbatim(A, omegas, lam, iso, sigma=1, delta=math.pi / 2, case="auto",
                       delta_min=DELTA_MIN) -> RootSineSolution:
    """``x_j = sqrt((A_j / W) sin(W t + d_j))`` with ``W`` from the frequency table, as printed.

    The printed argument is in rescaled time; it is read here as ``t``.
    """
    w2, case = isotonic_frequency_sq(A, omegas, lam, iso, case)
    big = _positive_sq(w2, "isotonic-pdm")
    A = _pair(A)
    return RootSineSolution("pdm-isotonic-verbatim",
                            {"A": _floats(A), "omega": _floats(omegas), "lambda": lam, "sigma": sigma,
                             "beta": _floats(iso), "Omega": big, "case": case, "time_reading": "t"},
                            base=(0.0, 0.0), coef=A / big, frequency=big, phase=delta, delta_min=delta_min)


@dataclass(frozen=True)
class ResidualReport:
    """Maximum equation-of-motion defect, plus the finite-difference check of the analytic derivatives."""

    max_residual: float
    fd_max_rel: float
    window: tuple[float, float]
    n_samples: int

    @property
    def fd_consistent(self) -> bool:
        return self.fd_max_rel <= 1e-6

    def __float__(self):
        return self.max_residual

    def to_dict(self):
        return {"max_residual": self.max_residual, "fd_max_rel_deviation": self.fd_max_rel,
                "window": list(self.window), "n_samples": self.n_samples}


def _fd5(fn, t, h):
    return (-fn(t + 2 * h) + 8 * fn(t + h) - 8 * fn(t - h) + fn(t - 2 * h)) / (12.0 * h)


def fd_check(sol: ClosedFormSolution, window, n=10, seed=0) -> float:
    """Max relative gap between analytic and 5-point finite-difference derivatives."""
    lo, hi = window
    span = hi - lo
    margin = 0.05 * span
    h = 1e-3 * min(span, sol.period)
    rng = np.random.default_rng(seed)
    ts = rng.uniform(lo + margin, hi - margin, n)
    worst = 0.0
    for t in ts:
        for deriv, exact in ((sol.position, sol.velocity(t)), (sol.velocity, sol.acceleration(t))):
            approx = _fd5(deriv, t, h)
            gap = np.max(np.abs(approx - exact)) / max(1.0, float(np.max(np.abs(exact))))
            worst = max(worst, float(gap))
    return worst


def ode_residual(sol: ClosedFormSolution, eom, window=None, n_samples=1000, seed=0) -> ResidualReport:
    """Substitute the closed form into ``x'' = eom(x, x', t)`` and report the largest defect."""
    window = tuple(window) if window is not None else sol.default_window()
    sol.check_window(np.asarray(window))
    ts = np.linspace(window[0], window[1], n_samples)
    x, v, a = sol.position(ts), sol.velocity(ts), sol.acceleration(ts)
    worst = 0.0
    for i, t in enumerate(ts):
        res = a[i] - np.asarray(eom(x[i], v[i], t))
        worst = max(worst, float(np.max(np.abs(res))))
    return ResidualReport(worst, fd_check(sol, window, seed=seed), (float(window[0]), float(window[1])), n_samples)


def oracle_vs_integration(sol: ClosedFormSolution, eom, cfg: IntegratorConfig | None = None, window=None,
                          return_trajectory=False):
    """Integrate from the closed form's state at the window start and compare along the way.

    Returns a :class:`DriftReport` with ``position`` and ``velocity`` entries
    holding the max deviation norms (relative to the largest closed-form norm).
    """
    from .integrators import integrate

    window = tuple(window) if window is not None else sol.default_window()
    traj: Trajectory = integrate(eom, sol.state(window[0]), window[1], cfg, label=sol.family)
    entries = {}
    for name, exact, got in (("position", sol.position(traj.times), traj.positions),
                             ("velocity", sol.velocity(traj.times), traj.velocities)):
        dev = float(np.max(np.linalg.norm(got - exact, axis=1)))
        scale = float(np.max(np.linalg.norm(exact, axis=1)))
        entries[name] = QuantityDrift(0.0, dev, dev / max(scale, 1e-12))
    report = DriftReport(entries)
    return (report, traj) if return_trajectory else report
