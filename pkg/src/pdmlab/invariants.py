"""Complex-factorization constants of motion and closed-form energy expressions.

Complex values are plain Python/numpy complex numbers. Every function that
takes a state accepts either a :class:`~pdmlab.dynamics.State` or a
:class:`~pdmlab.dynamics.Trajectory`; the latter returns one value per sample.
"""

from __future__ import annotations

import numbers

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedError
from .models import SINGULAR_EPS, ReferenceModel


def _qv(s):
    if hasattr(s, "positions"):
        return s.positions, s.velocities
    return s.position, s.velocity


def _axis(axis):
    if axis not in (1, 2):
        raise ParameterError("axis must be 1 or 2")
    return axis - 1


def _scalar(z):
    z = np.asarray(z)
    return complex(z) if z.ndim == 0 else z


def q_complex_linear(s, omega: float, axis: int):
    """``Q_j = q~_j + i w_j q_j``; rotates as ``exp(i w_j tau)``."""
    j = _axis(axis)
    q, qt = _qv(s)
    return _scalar(qt[..., j] + 1j * omega * q[..., j])


def q_complex_shifted(s, alpha: float, eta: float, axis: int):
    """``Q_j = q~_j + i a_j (q_j + eta_j)`` for the shifted oscillator."""
    j = _axis(axis)
    q, qt = _qv(s)
    return _scalar(qt[..., j] + 1j * alpha * (q[..., j] + eta))


def q_complex_isotonic(s, omega: float, beta: float, axis: int):
    """``Q_j = (q~_j^2 - w_j^2 q_j^2 + b_j / q_j^2) + 2i w_j q_j q~_j``; rotates at ``2 w_j``."""
    j = _axis(axis)
    q, qt = _qv(s)
    qj, vj = q[..., j], qt[..., j]
    if np.any(np.abs(qj) < SINGULAR_EPS):
        raise DomainError("isotonic factorization is singular at q_j = 0")
    return _scalar((vj**2 - omega**2 * qj**2 + beta / qj**2) + 2j * omega * qj * vj)


def _ipow(z, n: int):
    """Integer power by repeated squaring, so no complex logarithm is involved."""
    if n < 0:
        if np.any(z == 0):
            raise DomainError("zero base raised to a negative power")
        z, n = 1.0 / z, -n
    out = np.ones_like(z) if isinstance(z, np.ndarray) else 1.0 + 0.0j
    base = z
    while n:
        if n & 1:
            out = out * base
        base = base * base
        n >>= 1
    return out


def _as_int(n, name):
    if isinstance(n, numbers.Integral):
        return int(n)
    if isinstance(n, float) and n.is_integer():
        return int(n)
    raise UnsupportedError(f"{name} must be an integer frequency multiplier, got {n!r}")


def q_jk(qj, qk, n_j, n_k):
    """``Q_jk = Q_j^{n_k} (Q_k^*)^{n_j}`` with integer multipliers ``w_j = n_j w_0``."""
    n_j, n_k = _as_int(n_j, "n_j"), _as_int(n_k, "n_k")
    qj = np.asarray(qj, dtype=complex)
    qk = np.asarray(qk, dtype=complex)
    return _scalar(_ipow(qj, n_k) * _ipow(np.conj(qk), n_j))


def _ref_parts(ref: ReferenceModel):
    pot = ref.potential
    shift = np.asarray(pot.shift) if pot.family == "shifted-harmonic" else np.zeros(2)
    return pot, pot.omega, shift


def axis_factors(s, ref: ReferenceModel):
    """``(Q_1, Q_2)`` for the reference family."""
    pot, w, shift = _ref_parts(ref)
    if pot.family == "isotonic":
        return tuple(q_complex_isotonic(s, w[j], pot.iso[j], j + 1) for j in range(2))
    if pot.family == "shifted-harmonic":
        return tuple(q_complex_shifted(s, w[j], shift[j], j + 1) for j in range(2))
    return tuple(q_complex_linear(s, w[j], j + 1) for j in range(2))


def fundamental_integrals(s, ref: ReferenceModel):
    """``(I_1, I_2)``, each twice the axis energy ``E_j``.

    ``I_j = q~_j^2 + w_j^2 (q_j + eta_j)^2``; the isotonic family adds the
    ``b_j / q_j^2`` barrier so that ``I_j = 2 E_j`` still holds.
    """
    pot, w, shift = _ref_parts(ref)
    q, qt = _qv(s)
    out = []
    for j in range(2):
        val = qt[..., j] ** 2 + w[j] ** 2 * (q[..., j] + shift[j]) ** 2
        if pot.family == "isotonic":
            if np.any(np.abs(q[..., j]) < SINGULAR_EPS):
                raise DomainError("isotonic integral is singular at q_j = 0")
            val = val + pot.iso[j] / q[..., j] ** 2
        out.append(float(val) if np.ndim(val) == 0 else val)
    return tuple(out)


def isotropic_integrals(s, omega0, shifts=(0.0, 0.0)):
    """``(I_3, I_4) = (Re Q_12, Im Q_12)`` for equal frequencies.

    ``omega0`` may be a pair; unequal entries raise :class:`UnsupportedError`.
    """
    w = np.broadcast_to(np.asarray(omega0, dtype=float), (2,))
    if w[0] != w[1]:
        raise UnsupportedError("I_3, I_4 exist in this form only for equal frequencies")
    w0 = float(w[0])
    q, qt = _qv(s)
    d1 = q[..., 0] + shifts[0]
    d2 = q[..., 1] + shifts[1]
    i3 = qt[..., 0] * qt[..., 1] + w0**2 * d1 * d2
    i4 = w0 * (d1 * qt[..., 1] - d2 * qt[..., 0])
    if np.ndim(i3) == 0:
        return float(i3), float(i4)
    return i3, i4


def unwrapped_phase(values) -> np.ndarray:
    """``arg`` of a complex series, continued onto the nearest branch between samples."""
    return np.unwrap(np.angle(np.asarray(values, dtype=complex)))


def invariant_series(ref: ReferenceModel, traj) -> dict:
    """Named constants of motion evaluated along a reference-space trajectory.

    Always includes ``I1``, ``I2``, ``absQ12`` and the unwrapped ``argQ12``;
    adds ``I3``, ``I4`` for isotropic harmonic or shifted references.
    """
    pot, w, shift = _ref_parts(ref)
    i1, i2 = fundamental_integrals(traj, ref)
    q1, q2 = axis_factors(traj, ref)
    q12 = np.asarray(q_jk(q1, q2, pot.n[0], pot.n[1]))
    out = {"I1": np.asarray(i1), "I2": np.asarray(i2)}
    if pot.is_isotropic and pot.family != "isotonic":
        i3, i4 = isotropic_integrals(traj, w, tuple(shift))
        out["I3"] = np.asarray(i3)
        out["I4"] = np.asarray(i4)
    out["absQ12"] = np.abs(q12)
    out["argQ12"] = unwrapped_phase(q12)
    return out


ENERGY_FAMILIES = ("ml1", "ml3", "shifted-linear", "ml2", "isotonic-pdm")


def energy_formula(family: str, amplitudes, *, omega=1.0, sigma=1, beta=0.0, xi=0.0, lam=0.0,
                   omegas=None, Omega=None, sign=None) -> float:
    """Closed-form total energy of a catalog family, evaluated as printed.

    ml1, ml3, shifted-linear: ``w^2 S / (2 (1 + sigma beta S))``, ``S = A_1^2 + A_2^2``.
    ml2: ``w^2 xi^2 / (1 - xi^2 S)``.
    isotonic-pdm: ``((w_1^2 A_1 + w_2^2 A_2) / D - D (A_1 + A_2)) / 2`` with
    ``D = Omega + sign * lam * (A_1 + A_2)``; ``sign`` defaults to ``sigma``.
    A non-positive denominator raises :class:`DomainError`.
    """
    a1, a2 = (float(a) for a in amplitudes)
    if family in ("ml1", "ml3", "shifted-linear"):
        s = a1 * a1 + a2 * a2
        den = 1.0 + sigma * beta * s
        if not den > 0:
            raise DomainError(f"energy denominator 1 + sigma*beta*S = {den:.6g} is not positive")
        return 0.5 * omega**2 * s / den
    if family == "ml2":
        s = a1 * a1 + a2 * a2
        den = 1.0 - xi**2 * s
        if not den > 0:
            raise DomainError(f"energy denominator 1 - xi^2*S = {den:.6g} is not positive")
        return omega**2 * xi**2 / den
    if family == "isotonic-pdm":
        if Omega is None:
            raise ParameterError("isotonic-pdm energy needs Omega")
        w1, w2 = (float(w) for w in (omegas if omegas is not None else (omega, omega)))
        sgn = sigma if sign is None else sign
        if sgn not in (1, -1):
            raise ParameterError("sign must be +1 or -1")
        total = a1 + a2
        den = Omega + sgn * lam * total
        if not den > 0:
            raise DomainError(f"energy denominator Omega +/- lam*(A_1 + A_2) = {den:.6g} is not positive")
        return 0.5 * ((w1**2 * a1 + w2**2 * a2) / den - den * total)
    raise ParameterError(f"no energy formula for family {family!r}; choose from {ENERGY_FAMILIES}")


def turning_point_energy(family: str, amplitudes, *, omega=1.0, sigma=1, beta=0.0, xi=0.0) -> float:
    """Total energy of the rest state ``x = A``, evaluated directly from the Lagrangian.

    For ml2 this is ``w^2 xi^2 / (2 (1 + sigma beta S))``, the comparison value for
    its printed formula.
    """
    s = float(sum(a * a for a in amplitudes))
    den = 1.0 + sigma * beta * s
    if not den > 0:
        raise DomainError("turning point outside the validity domain")
    if family == "ml2":
        return 0.5 * omega**2 * xi**2 / den
    if family in ("ml1", "ml3", "shifted-linear"):
        return 0.5 * omega**2 * s / den
    raise ParameterError(f"no turning-point energy for family {family!r}")
