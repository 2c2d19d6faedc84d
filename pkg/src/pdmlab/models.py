"""Mass functions, potentials and the PDM / unit-mass model types.

Every evaluator accepts a single point of shape ``(2,)`` or a batch of shape
``(..., 2)`` and broadcasts over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError, ParameterError

MASS_FAMILIES = ("constant", "inverse-quadratic")
POTENTIAL_FAMILIES = (
    "harmonic",
    "shifted-harmonic",
    "pdm-scaled-harmonic",
    "pdm-scaled-constant",
    "isotonic",
    "pdm-deformed-isotonic",
)
PDM_FAMILIES = ("pdm-scaled-harmonic", "pdm-scaled-constant", "pdm-deformed-isotonic")
ISOTONIC_FAMILIES = ("isotonic", "pdm-deformed-isotonic")

# |x_j| below this is treated as sitting on the q^-2 singularity
SINGULAR_EPS = 1e-9


def _pair(value, name):
    arr = tuple(float(v) for v in np.broadcast_to(np.asarray(value, dtype=float), (2,)))
    if not all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite, got {value!r}")
    return arr


def as_points(x) -> np.ndarray:
    """Validate ``x`` as one or more finite 2-vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        raise InputError(f"expected trailing dimension 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite coordinate")
    return x


@dataclass(frozen=True)
class MassFunction:
    """``m = 1 / (1 + sigma * beta * |x - center|^2)``, or ``m = 1``.

    ``beta`` is kept non-negative and the sign lives in ``sigma``.
    """

    family: str = "inverse-quadratic"
    sigma: int = 1
    beta: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.family not in MASS_FAMILIES:
            raise ParameterError(f"unknown mass family {self.family!r}")
        if self.sigma not in (1, -1):
            raise ParameterError(f"sigma must be +1 or -1, got {self.sigma!r}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ParameterError(f"beta must be finite and >= 0, got {self.beta!r}")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "center", _pair(self.center, "center"))

    @property
    def is_constant(self) -> bool:
        return self.family == "constant" or self.beta == 0.0

    @property
    def sb(self) -> float:
        """Signed deformation ``sigma * beta`` (zero for the constant family)."""
        return 0.0 if self.family == "constant" else self.sigma * self.beta

    def offset(self, x):
        return x - np.asarray(self.center)

    def radius_sq(self, x):
        d = self.offset(x)
        return d[..., 0] ** 2 + d[..., 1] ** 2


def _mass_from_rs2(mass: MassFunction, rs2):
    denom = 1.0 + mass.sb * rs2
    if np.any(denom <= 0.0):
        raise DomainError(
            f"beta*r_s^2 = {np.max(mass.beta * rs2):.6g} outside validity domain (< 1) for sigma=-1"
        )
    return 1.0 / denom


def mass_value(mass: MassFunction, x):
    """Mass at ``x``; raises :class:`DomainError` on the sigma=-1 ring and beyond."""
    x = as_points(x)
    if mass.is_constant:
        return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0
    m = _mass_from_rs2(mass, mass.radius_sq(x))
    return m if x.ndim > 1 else float(m)


def mass_gradient(mass: MassFunction, x):
    """Analytic gradient ``d_j m = -2 sigma beta (x_j - c_j) m^2``."""
    x = as_points(x)
    if mass.is_constant:
        return np.zeros_like(x)
    d = mass.offset(x)
    m = _mass_from_rs2(mass, d[..., 0] ** 2 + d[..., 1] ** 2)
    return -2.0 * mass.sb * d * (m**2)[..., None]


def mass_radial_log_derivative(mass: MassFunction, x):
    """``(m'(r)/m) * r`` with r the distance from the mass center; equals ``-2 sigma beta r^2 m``."""
    x = as_points(x)
    if mass.is_constant:
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
    rs2 = mass.radius_sq(x)
    out = -2.0 * mass.sb * rs2 * _mass_from_rs2(mass, rs2)
    return out if x.ndim > 1 else float(out)


@dataclass(frozen=True)
class Potential:
    """Potential energy families.

    Frequencies are ``omega_j = n_j * omega0``. ``shift`` is the additive
    shift of the shifted-harmonic family, ``V = sum alpha_j^2 (q_j + eta_j)^2 / 2``.
    ``xi`` are the ML-II constants and ``iso`` the isotonic strengths
    ``(beta_1, beta_2)``. PDM-scaled families carry the model's ``mass``.
    """

    family: str
    omega0: float = 1.0
    n: tuple[int, int] = (1, 1)
    shift: tuple[float, float] = (0.0, 0.0)
    xi: tuple[float, float] = (0.0, 0.0)
    iso: tuple[float, float] = (0.0, 0.0)
    mass: MassFunction | None = None

    def __post_init__(self):
        if self.family not in POTENTIAL_FAMILIES:
            raise ParameterError(f"unknown potential family {self.family!r}")
        if not np.isfinite(self.omega0):
            raise ParameterError("omega0 must be finite")
        n = tuple(int(k) for k in self.n)
        if any(k != v for k, v in zip(n, self.n)):
            raise ParameterError(f"frequency multipliers must be integers, got {self.n!r}")
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "n", n)
        for name in ("shift", "xi", "iso"):
            object.__setattr__(self, name, _pair(getattr(self, name), name))
        if self.family in PDM_FAMILIES and self.mass is None:
            raise ParameterError(f"{self.family} potential needs a mass function")

    @property
    def omega(self) -> np.ndarray:
        return self.omega0 * np.asarray(self.n, dtype=float)

    @property
    def is_isotropic(self) -> bool:
        return self.n[0] == self.n[1]


def _check_singular(pot: Potential, x):
    if pot.family in ISOTONIC_FAMILIES and np.any(np.abs(x) < SINGULAR_EPS):
        raise DomainError("isotonic potential is singular at x_j = 0")


def potential_value(pot: Potential, x):
    """Value of the full potential, mass factor included for PDM families."""
    x = as_points(x)
    _check_singular(pot, x)
    w2 = pot.omega**2
    fam = pot.family
    if fam in ("harmonic", "shifted-harmonic"):
        d = x + np.asarray(pot.shift) if fam == "shifted-harmonic" else x
        v = 0.5 * (w2 * d**2).sum(axis=-1)
    elif fam == "pdm-scaled-harmonic":
        d = pot.mass.offset(x)
        v = 0.5 * mass_value(pot.mass, x) * (w2 * d**2).sum(axis=-1)
    elif fam == "pdm-scaled-constant":
        xi2 = pot.xi[0] ** 2 + pot.xi[1] ** 2
        v = 0.5 * mass_value(pot.mass, x) * pot.omega0**2 * xi2
    elif fam == "isotonic":
        v = 0.5 * (w2 * x**2 + np.asarray(pot.iso) / x**2).sum(axis=-1)
    else:  # pdm-deformed-isotonic
        m = mass_value(pot.mass, x)
        v = 0.5 * (m * (w2 * x**2).sum(axis=-1) + (np.asarray(pot.iso) / x**2).sum(axis=-1) / m)
    return v if x.ndim > 1 else float(v)


def potential_gradient(pot: Potential, x):
    """Analytic gradient of the full (generally non-separable) potential."""
    x = as_points(x)
    _check_singular(pot, x)
    w2 = pot.omega**2
    fam = pot.family
    if fam == "harmonic":
        return w2 * x
    if fam == "shifted-harmonic":
        return w2 * (x + np.asarray(pot.shift))
    if fam == "isotonic":
        return w2 * x - np.asarray(pot.iso) / x**3
    m = np.asarray(mass_value(pot.mass, x))[..., None]
    dm = mass_gradient(pot.mass, x)
    if fam == "pdm-scaled-harmonic":
        d = pot.mass.offset(x)
        h = (w2 * d**2).sum(axis=-1)[..., None]
        return 0.5 * dm * h + m * w2 * d
    if fam == "pdm-scaled-constant":
        xi2 = pot.xi[0] ** 2 + pot.xi[1] ** 2
        return 0.5 * dm * pot.omega0**2 * xi2
    # pdm-deformed-isotonic: V = (m S + B / m) / 2
    iso = np.asarray(pot.iso)
    s = (w2 * x**2).sum(axis=-1)[..., None]
    b = (iso / x**2).sum(axis=-1)[..., None]
    inv_m_grad = -dm / m**2
    return 0.5 * (dm * s + 2.0 * m * w2 * x + inv_m_grad * b - 2.0 * iso / (m * x**3))


def axis_potential(pot: Potential, x, axis: int):
    """Potential slice attributed to ``axis`` (1 or 2) at the current point.

    Separable families return their own axis term. For PDM families the
    other coordinate is frozen at its current value and the slice is taken
    relative to the potential the other axis carries alone, i.e. with this
    axis moved to the mass center and its own terms removed. With m = 1 this
    is exactly the separable axis term.
    """
    if axis not in (1, 2):
        raise ParameterError("axis must be 1 or 2")
    x = as_points(x)
    _check_singular(pot, x)
    j, k = axis - 1, 2 - axis
    w2 = pot.omega**2
    xj, xk = x[..., j], x[..., k]
    fam = pot.family
    if fam == "harmonic":
        return 0.5 * w2[j] * xj**2
    if fam == "shifted-harmonic":
        return 0.5 * w2[j] * (xj + pot.shift[j]) ** 2
    if fam == "isotonic":
        return 0.5 * (w2[j] * xj**2 + pot.iso[j] / xj**2)

    full = potential_value(pot, x)
    moved = np.array(x, dtype=float, copy=True)
    moved[..., j] = pot.mass.center[j]
    m0 = mass_value(pot.mass, moved)
    if fam == "pdm-scaled-harmonic":
        rest = 0.5 * m0 * w2[k] * (xk - pot.mass.center[k]) ** 2
    elif fam == "pdm-scaled-constant":
        rest = 0.5 * m0 * pot.omega0**2 * pot.xi[k] ** 2
    else:
        rest = 0.5 * (m0 * w2[k] * xk**2 + pot.iso[k] / (m0 * xk**2))
    return full - rest


@dataclass(frozen=True)
class PdmModel:
    """Position-dependent-mass system ``L = m |x'|^2 / 2 - V(x)``."""

    mass: MassFunction
    potential: Potential
    label: str = ""

    def __post_init__(self):
        pm = self.potential.mass
        if pm is not None and pm != self.mass:
            raise ParameterError("potential mass factor differs from the model's mass function")


@dataclass(frozen=True)
class ReferenceModel:
    """Unit-mass system ``L = |q~|^2 / 2 - V(q)`` in rescaled time."""

    potential: Potential
    label: str = ""

    def __post_init__(self):
        if self.potential.family not in ("harmonic", "shifted-harmonic", "isotonic"):
            raise ParameterError(
                f"reference potential must be harmonic, shifted-harmonic or isotonic, "
                f"got {self.potential.family}"
            )


@dataclass(frozen=True)
class ModelPair:
    """A PDM model, its unit-mass reference, the linking transform and oracle ids."""

    name: str
    pdm: PdmModel
    reference: ReferenceModel
    transform: object  # transforms.TransformSpec; untyped here to avoid a cycle
    oracles: tuple[str, ...] = ()
    params: dict = field(default_factory=dict, compare=False)
    equations: str = ""


def mass_terms(mass: MassFunction, x1: float, x2: float):
    """Unchecked-input scalar kernel returning ``(m, dm/dx1, dm/dx2)``.

    Used on the integrator hot path; the domain check is kept.
    """
    sb = mass.sb
    if sb == 0.0:
        return 1.0, 0.0, 0.0
    d1 = x1 - mass.center[0]
    d2 = x2 - mass.center[1]
    denom = 1.0 + sb * (d1 * d1 + d2 * d2)
    if not denom > 0.0:
        raise DomainError(f"beta*r_s^2 = {mass.beta * (d1 * d1 + d2 * d2):.6g} outside validity domain")
    m = 1.0 / denom
    c = -2.0 * sb * m * m
    return m, c * d1, c * d2


def potential_gradient_scalar(pot: Potential, x1: float, x2: float, mterms=None):
    """Scalar kernel of :func:`potential_gradient` for a single point."""
    fam = pot.family
    w1 = (pot.n[0] * pot.omega0) ** 2
    w2 = (pot.n[1] * pot.omega0) ** 2
    if fam in ISOTONIC_FAMILIES and (abs(x1) < SINGULAR_EPS or abs(x2) < SINGULAR_EPS):
        raise DomainError("isotonic potential is singular at x_j = 0")
    if fam == "harmonic":
        return w1 * x1, w2 * x2
    if fam == "shifted-harmonic":
        return w1 * (x1 + pot.shift[0]), w2 * (x2 + pot.shift[1])
    if fam == "isotonic":
        return w1 * x1 - pot.iso[0] / x1**3, w2 * x2 - pot.iso[1] / x2**3
    m, g1, g2 = mterms if mterms is not None else mass_terms(pot.mass, x1, x2)
    if fam == "pdm-scaled-harmonic":
        d1 = x1 - pot.mass.center[0]
        d2 = x2 - pot.mass.center[1]
        h = 0.5 * (w1 * d1 * d1 + w2 * d2 * d2)
        return g1 * h + m * w1 * d1, g2 * h + m * w2 * d2
    if fam == "pdm-scaled-constant":
        c = 0.5 * pot.omega0**2 * (pot.xi[0] ** 2 + pot.xi[1] ** 2)
        return g1 * c, g2 * c
    b1, b2 = pot.iso
    s = w1 * x1 * x1 + w2 * x2 * x2
    b = b1 / (x1 * x1) + b2 / (x2 * x2)
    im2 = 1.0 / (m * m)
    return (
        0.5 * (g1 * s - g1 * im2 * b) + m * w1 * x1 - b1 / (m * x1**3),
        0.5 * (g2 * s - g2 * im2 * b) + m * w2 * x2 - b2 / (m * x2**3),
    )
