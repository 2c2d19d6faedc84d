"""Nonlocal point transformation between PDM (x, t) and unit-mass (q, tau) spaces.

The pointwise maps are the closed forms per family; ``q~ = x' sqrt(m)`` and
``tau = int f dt`` follow the mapping definitions literally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MonotonicityError, NonInvertibleError, ParameterError
from .models import MassFunction, as_points, mass_gradient, mass_radial_log_derivative, mass_value

TRANSFORM_FAMILIES = ("radial-sqrt-m", "radial-sqrt-m-shifted-q", "constant-xi", "shifted-radius")
RADIAL_FAMILIES = ("radial-sqrt-m", "radial-sqrt-m-shifted-q", "shifted-radius")


@dataclass(frozen=True)
class TransformSpec:
    """Point map ``x -> q``, velocity map and time-rescaling factor ``f``.

    radial-sqrt-m            q = x sqrt(m(r))
    radial-sqrt-m-shifted-q  q = x sqrt(m(r)) - eta
    shifted-radius           q = (x - c) sqrt(m(r_s)), c the mass center
    constant-xi              q_j = xi_j sqrt(m(r)), xi_1 = xi_2 = xi / sqrt(2)
    """

    family: str
    mass: MassFunction
    eta: tuple[float, float] = (0.0, 0.0)
    xi: float = 0.0

    def __post_init__(self):
        if self.family not in TRANSFORM_FAMILIES:
            raise ParameterError(f"unknown transform family {self.family!r}")
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        object.__setattr__(self, "xi", float(self.xi))
        if self.family == "constant-xi" and self.xi <= 0:
            raise ParameterError("constant-xi transform needs xi > 0")
        if self.family == "constant-xi" and self.mass.is_constant:
            raise MonotonicityError("constant-xi transform with constant mass has f = 0")

    @property
    def is_radial(self) -> bool:
        return self.family in RADIAL_FAMILIES

    @property
    def xi_components(self) -> np.ndarray:
        return np.full(2, self.xi / math.sqrt(2.0))


def f_factor(ts: TransformSpec, x, check: bool = True):
    """Time-rescaling factor ``dtau/dt``.

    Radial families use ``1 + (m'/m) r / 4``; constant-xi uses ``xi m' / (4 m)``.
    Raises :class:`MonotonicityError` when ``check`` and any value is <= 0.
    """
    x = as_points(x)
    lg = np.asarray(mass_radial_log_derivative(ts.mass, x))
    if ts.is_radial:
        f = 1.0 + 0.25 * lg
    else:
        r = np.sqrt(ts.mass.radius_sq(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            # (m'/m) = lg / r; the limit at r = 0 is zero
            ratio = np.where(r > 0, lg / np.where(r > 0, r, 1.0), 0.0)
        f = ts.xi * ratio / 4.0
    if check and np.any(f <= 0.0):
        raise MonotonicityError(f"f factor is non-positive (min {np.min(f):.6g}); tau(t) not invertible")
    return f if x.ndim > 1 else float(f)


def g_factor(ts: TransformSpec, x):
    """``g = m f^2``, the invariance condition, by construction."""
    return np.asarray(mass_value(ts.mass, x)) * np.asarray(f_factor(ts, x, check=False)) ** 2


def point_map(ts: TransformSpec, x):
    x = as_points(x)
    sm = np.sqrt(np.asarray(mass_value(ts.mass, x)))[..., None]
    fam = ts.family
    if fam == "radial-sqrt-m":
        q = x * sm
    elif fam == "radial-sqrt-m-shifted-q":
        q = x * sm - np.asarray(ts.eta)
    elif fam == "shifted-radius":
        q = ts.mass.offset(x) * sm
    else:
        q = ts.xi_components * sm
    return q


def velocity_map(ts: TransformSpec, x, v):
    """``q~_j = v_j sqrt(m)`` by definition (not the tau-derivative of ``point_map``)."""
    x = as_points(x)
    v = as_points(v)
    return v * np.sqrt(np.asarray(mass_value(ts.mass, x)))[..., None]


def image_margin(ts: TransformSpec, q):
    """``1 - sigma beta rho^2`` for radial families; q is in the image iff it is positive."""
    if not ts.is_radial:
        raise NonInvertibleError("constant-xi map has no pointwise inverse")
    q = as_points(q)
    d = q + np.asarray(ts.eta) if ts.family == "radial-sqrt-m-shifted-q" else q
    return 1.0 - ts.mass.sb * (d[..., 0] ** 2 + d[..., 1] ** 2)


def inverse_point_map(ts: TransformSpec, q):
    """Closed-form inverse ``x = q / sqrt(1 - sigma beta |q|^2)`` composed with the family shifts."""
    if not ts.is_radial:
        raise NonInvertibleError("constant-xi map collapses every circle r = const to one point")
    q = as_points(q)
    margin = np.asarray(image_margin(ts, q))
    if np.any(margin <= 0.0):
        raise NonInvertibleError("q outside the image of the point map (1 - sigma*beta*rho^2 <= 0)")
    d = q + np.asarray(ts.eta) if ts.family == "radial-sqrt-m-shifted-q" else q
    x = d / np.sqrt(margin)[..., None]
    if ts.family == "shifted-radius":
        x = x + np.asarray(ts.mass.center)
    return x


def point_map_partials(ts: TransformSpec, x):
    """Analytic diagonal partials ``(dq_1/dx_1, dq_2/dx_2)``."""
    x = as_points(x)
    m = np.asarray(mass_value(ts.mass, x))[..., None]
    dm = mass_gradient(ts.mass, x)
    sm = np.sqrt(m)
    if ts.is_radial:
        d = ts.mass.offset(x)
        return sm + d * dm / (2.0 * sm)
    return ts.xi_components * dm / (2.0 * sm)


def invariance_residual(ts: TransformSpec, grid, form: str | None = None) -> float:
    """Max defect of the family's invariance identity over ``grid``.

    ``form="trace"`` checks ``dq_1/dx_1 + dq_2/dx_2 = 2 sqrt(m) f``; this is
    the identity the radial families satisfy. ``form="quadratic"`` checks
    ``(dq_1/dx_1)^2 + (dq_2/dx_2)^2 = 2 m f^2``, which is how the f factor of
    the constant-xi family is defined. The default picks the family's own form.
    """
    if form is None:
        form = "trace" if ts.is_radial else "quadratic"
    grid = as_points(grid).reshape(-1, 2)
    p = point_map_partials(ts, grid)
    m = np.asarray(mass_value(ts.mass, grid))
    f = np.asarray(f_factor(ts, grid, check=False))
    if form == "trace":
        res = p.sum(axis=-1) - 2.0 * np.sqrt(m) * f
    elif form == "quadratic":
        res = (p**2).sum(axis=-1) - 2.0 * m * f**2
    else:
        raise ParameterError(f"unknown invariance form {form!r}")
    return float(np.max(np.abs(res)))


def cumulative_simpson(y, t) -> np.ndarray:
    """Cumulative integral of samples ``y(t)`` on a possibly non-uniform grid.

    Pairs of intervals are integrated with the quadratic through their three
    nodes (non-uniform Simpson); the odd node inside each pair takes the
    partial integral of the same quadratic. A trailing unpaired interval uses
    the quadratic through the last three nodes. Two nodes fall back to the
    trapezoid rule.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    n = t.size
    if n != y.size or n < 2:
        raise ParameterError("need matching y and t with at least two nodes")
    out = np.zeros(n)
    if n == 2:
        out[1] = 0.5 * (y[0] + y[1]) * (t[1] - t[0])
        return out

    def quad_parts(i):
        # integrals of the interpolant through nodes i, i+1, i+2 over [t_i, t_i+1] and [t_i+1, t_i+2]
        h0 = t[i + 1] - t[i]
        h1 = t[i + 2] - t[i + 1]
        y0, y1, y2 = y[i], y[i + 1], y[i + 2]
        s = h0 + h1
        first = h0 / 6.0 * (y0 * (2.0 * h0 + 3.0 * h1) / s + y1 * (h0 + 3.0 * h1) / h1 - y2 * h0**2 / (h1 * s))
        second = h1 / 6.0 * (-y0 * h1**2 / (h0 * s) + y1 * (h1 + 3.0 * h0) / h0 + y2 * (2.0 * h1 + 3.0 * h0) / s)
        return first, second

    i = 0
    while i + 2 < n:
        a, b = quad_parts(i)
        out[i + 1] = out[i] + a
        out[i + 2] = out[i + 1] + b
        i += 2
    if i + 1 < n:
        _, b = quad_parts(n - 3)
        out[n - 1] = out[n - 2] + b
    return out


def tau_of_t(traj, ts: TransformSpec) -> np.ndarray:
    """Rescaled time ``tau(t) = int_{t0}^{t} f(x(t')) dt'`` at every trajectory node.

    Returns an ``(n, 2)`` array of ``(t, tau)`` pairs.
    """
    f = np.asarray(f_factor(ts, traj.positions))
    tau = cumulative_simpson(f, traj.times)
    if np.any(np.diff(tau) <= 0.0):
        raise MonotonicityError("tau(t) is not strictly increasing along the trajectory")
    return np.column_stack([traj.times, tau])


def map_trajectory(traj, ts: TransformSpec):
    """Map an x-space trajectory to (q, q~) samples on its tau grid."""
    from .dynamics import Trajectory

    tau = tau_of_t(traj, ts)[:, 1] + traj.times[0]
    q = point_map(ts, traj.positions)
    qt = velocity_map(ts, traj.positions, traj.velocities)
    meta = dict(traj.meta)
    meta.update(source=traj.label, transform=ts.family, time_variable="tau")
    return Trajectory(tau, q, qt, label=f"{traj.label}->q".lstrip("-"), meta=meta)
