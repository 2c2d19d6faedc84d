"""Euler-Lagrange equations of motion, energies and drift monitoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping

import numpy as np

from .errors import InputError, ParameterError
from .models import (
    PdmModel,
    ReferenceModel,
    as_points,
    axis_potential,
    mass_gradient,
    mass_terms,
    mass_value,
    potential_gradient_scalar,
    potential_gradient,
    potential_value,
)

Acceleration = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

METHODS = ("fixed-rk4", "adaptive-rk45")


@dataclass(frozen=True)
class State:
    """Position, velocity and time. In reference space these are q, q~ and tau."""

    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_points(self.position))
        object.__setattr__(self, "velocity", as_points(self.velocity))
        if not np.all(np.isfinite(self.time)):
            raise InputError("non-finite time")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_vector(cls, y, t=0.0):
        y = np.asarray(y, dtype=float)
        return cls(y[:2], y[2:4], float(t))


@dataclass
class Trajectory:
    """Time-ordered samples stored column-wise.

    ``times`` has shape ``(n,)``; ``positions`` and ``velocities`` ``(n, 2)``.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        n = self.times.size
        if self.positions.shape[0] != n or self.velocities.shape[0] != n:
            raise ParameterError("times, positions and velocities differ in length")
        if self.strict:
            if n < 2:
                raise ParameterError("a trajectory needs at least two samples")
            if np.any(np.diff(self.times) <= 0):
                raise ParameterError("sample times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def __getitem__(self, i) -> State:
        return State(self.positions[i], self.velocities[i], float(self.times[i]))

    def __iter__(self) -> Iterator[State]:
        for i in range(len(self)):
            yield self[i]

    @property
    def final(self) -> State:
        return self[-1]

    @classmethod
    def from_closed_form(cls, sol, times, label=""):
        times = np.asarray(times, dtype=float)
        return cls(times, sol.position(times), sol.velocity(times), label=label or sol.family,
                   meta={"source": "closed-form", "family": sol.family})


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator selection and tolerances.

    ``output_dt=None`` emits every accepted step; otherwise samples are
    produced on a uniform grid by dense-output interpolation.
    """

    method: str = "adaptive-rk45"
    h: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-10
    max_steps: int = 1_000_000
    output_dt: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.h > 0:
            raise ParameterError("h must be > 0")
        for name in ("rtol", "atol"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {val!r}")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")
        if self.output_dt is not None and not self.output_dt > 0:
            raise ParameterError("output_dt must be > 0")


@dataclass(frozen=True)
class QuantityDrift:
    initial: float
    max_abs: float
    max_rel: float

    def to_dict(self):
        return {"initial": self.initial, "max_abs_deviation": self.max_abs, "max_rel_deviation": self.max_rel}


@dataclass(frozen=True)
class DriftReport:
    entries: dict

    def __getitem__(self, name) -> QuantityDrift:
        return self.entries[name]

    def __contains__(self, name):
        return name in self.entries

    def to_dict(self):
        return {k: v.to_dict() for k, v in self.entries.items()}


def pdm_acceleration(model: PdmModel, s: State) -> np.ndarray:
    """Solve the PDM Euler-Lagrange equation for the acceleration.

    ``m a_j + (grad m . v) v_j - (d_j m) |v|^2 / 2 + d_j V = 0``
    with the full (non-separable) potential gradient.
    """
    return pdm_eom(model)(s.position, s.velocity, s.time)


def pdm_eom(model: PdmModel) -> Acceleration:
    """Acceleration callback ``a(x, v, t)`` for the integrators."""
    mass, pot = model.mass, model.potential

    def accel(x, v, t=0.0):
        x1, x2 = float(x[0]), float(x[1])
        v1, v2 = float(v[0]), float(v[1])
        mt = mass_terms(mass, x1, x2)
        m, g1, g2 = mt
        p1, p2 = potential_gradient_scalar(pot, x1, x2, mt)
        half_v2 = 0.5 * (v1 * v1 + v2 * v2)
        mdot = g1 * v1 + g2 * v2
        return np.array([(half_v2 * g1 - mdot * v1 - p1) / m, (half_v2 * g2 - mdot * v2 - p2) / m])

    return accel


def reference_acceleration(ref: ReferenceModel, s: State) -> np.ndarray:
    """``dq~/dtau = -grad V(q)`` for the unit-mass reference."""
    return reference_eom(ref)(s.position, s.velocity, s.time)


def reference_eom(ref: ReferenceModel) -> Acceleration:
    pot = ref.potential

    def accel(q, qt, tau=0.0):
        p1, p2 = potential_gradient_scalar(pot, float(q[0]), float(q[1]))
        return np.array([-p1, -p2])

    return accel


def el_residual(model: PdmModel, x, v, a) -> np.ndarray:
    """Left-hand side of the PDM Euler-Lagrange equation for a given acceleration."""
    x, v, a = as_points(x), as_points(v), as_points(a)
    m = np.asarray(mass_value(model.mass, x))[..., None]
    dm = mass_gradient(model.mass, x)
    dv = potential_gradient(model.potential, x)
    v2 = (v**2).sum(axis=-1)[..., None]
    mdot = (dm * v).sum(axis=-1)[..., None]
    return m * a + mdot * v - 0.5 * dm * v2 + dv


def total_energy_pdm(model: PdmModel, s: State) -> float:
    """``E = m |v|^2 / 2 + V``, conserved by the PDM dynamics."""
    return float(energy_series(model, s.position, s.velocity))


def energy_series(model: PdmModel, x, v):
    x, v = as_points(x), as_points(v)
    return 0.5 * np.asarray(mass_value(model.mass, x)) * (v**2).sum(axis=-1) + potential_value(model.potential, x)


def sub_energy(model: PdmModel, s: State, axis: int) -> float:
    """``E_xj = m v_j^2 / 2 + V_j``, with ``V_j`` the axis slice of the potential."""
    return float(sub_energy_series(model, s.position, s.velocity, axis))


def sub_energy_series(model: PdmModel, x, v, axis: int):
    x, v = as_points(x), as_points(v)
    m = np.asarray(mass_value(model.mass, x))
    return 0.5 * m * v[..., axis - 1] ** 2 + axis_potential(model.potential, x, axis)


def reference_energy(ref: ReferenceModel, s: State) -> float:
    return float(0.5 * (s.velocity**2).sum() + potential_value(ref.potential, s.position))


def drift(traj: Trajectory, quantities: Mapping[str, Callable[[State], float]], atol: float = 1e-12) -> DriftReport:
    """Maximum deviation of each quantity from its value at the first sample.

    Relative deviations are scaled by ``max(|initial|, atol)``.
    """
    if len(traj) < 2:
        raise ParameterError("drift needs at least two samples")
    if callable(quantities):
        quantities = {getattr(quantities, "__name__", "q0"): quantities}
    elif not isinstance(quantities, Mapping):
        quantities = {getattr(fn, "__name__", f"q{i}"): fn for i, fn in enumerate(quantities)}
    entries = {}
    states = list(traj)
    for name, fn in quantities.items():
        values = np.array([fn(s) for s in states], dtype=float)
        entries[name] = drift_of_series(values, atol)
    return DriftReport(entries)


def drift_of_series(values, atol: float = 1e-12) -> QuantityDrift:
    values = np.asarray(values, dtype=float)
    v0 = float(values[0])
    dev = float(np.max(np.abs(values - v0)))
    return QuantityDrift(v0, dev, dev / max(abs(v0), atol))
