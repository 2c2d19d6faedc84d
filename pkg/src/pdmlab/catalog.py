"""Named model pairs with default parameters, closed forms and initial states."""

from __future__ import annotations

import math

import numpy as np

from .dynamics import State
from .errors import CatalogError, ConfigError, ParameterError
from .models import MassFunction, ModelPair, PdmModel, Potential, ReferenceModel, mass_value
from .oracles import (
    isotonic_frequency_sq,
    ml2_frequency_sq,
    pdm_isotonic_verbatim,
    pdm_ml1,
    pdm_ml2,
    pdm_ml3,
    reference_isotonic_ep,
    reference_linear,
    reference_shifted,
)
from .transforms import TransformSpec, inverse_point_map

_ML = {"sign": 1, "beta": 0.1, "omega": 1.0, "n1": 1, "n2": 1, "amplitude": (1.0, 0.5), "phase": 0.0}
_ISO = {"omega": 1.0, "n1": 1, "n2": 1, "beta1": 0.75, "beta2": 0.5, "energy": (1.0, 1.0), "phase": 0.0}

DEFAULTS = {
    "ml1": dict(_ML),
    "ml2": dict(_ML, sign=-1, beta=0.25, xi=2.0),
    "ml3": dict(_ML, gamma=(0.5, 0.0)),
    "shifted-linear": dict(_ML, eta=(0.5, 0.0)),
    "isotonic-pdm": dict(_ISO, sign=1, amplitude=(1.0, 1.0), case="auto", energy_sign=None, **{"lambda": 0.1}),
    "linear": {"omega": 1.0, "n1": 1, "n2": 2, "amplitude": (1.0, 0.5), "phase": 0.0},
    "shifted": {"omega": 1.0, "n1": 1, "n2": 1, "amplitude": (1.0, 0.5), "phase": 0.0, "eta": (0.5, 0.0)},
    "isotonic": dict(_ISO),
}

PDM_MODELS = ("ml1", "ml2", "ml3", "shifted-linear", "isotonic-pdm")
REFERENCE_MODELS = ("linear", "shifted", "isotonic")
MODEL_NAMES = PDM_MODELS + REFERENCE_MODELS

DESCRIPTIONS = {
    "ml1": ("m = 1/(1 + s b r^2), V = m w^2 r^2 / 2", "x = A cos(W t + phi), W^2 = w^2 / (1 + s b |A|^2)",
            "q = x sqrt(m), f = 1 + (m'/m) r / 4", "unit-mass harmonic oscillator"),
    "ml2": ("m = 1/(1 + s b r^2), V = m w^2 xi^2 / 2", "x = A cos(W t + phi), W^2 = -s w^2 b xi^2 / (1 + s b |A|^2)",
            "q_j = (xi / sqrt 2) sqrt(m), f = xi m' / (4 m)", "unit-mass harmonic oscillator"),
    "ml3": ("m = 1/(1 + s b |x + gamma|^2), V = m w^2 |x + gamma|^2 / 2",
            "x = A cos(W t + phi) - gamma, ML-I frequency", "q = (x + gamma) sqrt(m), shifted-radius f",
            "unit-mass harmonic oscillator"),
    "shifted-linear": ("ML-I mass and potential", "x = A cos(W t + phi), ML-I frequency",
                       "q = x sqrt(m) - eta, radial f", "unit-mass shifted oscillator"),
    "isotonic-pdm": ("m = 1/(1 + s lam r^2), V = (m sum w_j^2 x_j^2 + sum b_j / x_j^2 / m) / 2",
                     "x_j = sqrt((A_j / W) sin(W t + d_j)) as printed (diagnostic)",
                     "q = x sqrt(m), radial f", "unit-mass isotonic oscillator"),
    "linear": ("unit mass, V = sum w_j^2 q_j^2 / 2, w_j = n_j w0", "q_j = A_j cos(w_j tau + phi_j)",
               "identity", "itself"),
    "shifted": ("unit mass, V = sum w_j^2 (q_j + eta_j)^2 / 2", "q_j = A_j cos(w_j tau + phi_j) - eta_j",
                "identity", "itself"),
    "isotonic": ("unit mass, V = sum (w_j^2 q_j^2 + b_j / q_j^2) / 2",
                 "q_j = sqrt(E_j / w_j^2 + C_j sin(2 w_j tau + d_j))", "identity", "itself"),
}

# parameters each model accepts beyond the common initial-condition keys
_ALLOWED = {
    "ml1": {"sign", "beta", "omega", "n1", "n2", "amplitude", "phase"},
    "ml2": {"sign", "beta", "omega", "n1", "n2", "amplitude", "phase", "xi"},
    "ml3": {"sign", "beta", "omega", "n1", "n2", "amplitude", "phase", "gamma"},
    "shifted-linear": {"sign", "beta", "omega", "n1", "n2", "amplitude", "phase", "eta"},
    "isotonic-pdm": {"sign", "lambda", "omega", "n1", "n2", "amplitude", "phase", "beta1", "beta2", "energy",
                     "case", "energy_sign"},
    "linear": {"omega", "n1", "n2", "amplitude", "phase"},
    "shifted": {"omega", "n1", "n2", "amplitude", "phase", "eta"},
    "isotonic": {"omega", "n1", "n2", "phase", "beta1", "beta2", "energy"},
}


def resolve_params(name: str, overrides: dict | None = None) -> dict:
    """Defaults for ``name`` merged with ``overrides``; unknown keys raise :class:`ConfigError`."""
    if name not in DEFAULTS:
        raise CatalogError(f"unknown model {name!r}; valid names: {', '.join(MODEL_NAMES)}")
    params = dict(DEFAULTS[name])
    for key, val in (overrides or {}).items():
        if key not in _ALLOWED[name]:
            raise ConfigError(f"parameter {key!r} does not apply to model {name!r}; "
                              f"allowed: {', '.join(sorted(_ALLOWED[name]))}")
        params[key] = val
    return _normalize(name, params)


def _pair(v, key):
    try:
        arr = np.broadcast_to(np.asarray(v, dtype=float), (2,))
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number or a pair of numbers, got {v!r}") from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{key} must be finite")
    return tuple(float(a) for a in arr)


def _normalize(name, p):
    if "sign" in p:
        if p["sign"] in ("+", "+1", 1, 1.0):
            p["sign"] = 1
        elif p["sign"] in ("-", "-1", -1, -1.0):
            p["sign"] = -1
        else:
            raise ConfigError(f"sign must be '+' or '-', got {p['sign']!r}")
    for key in ("beta", "lambda", "xi"):
        if key in p:
            val = float(p[key])
            if not (math.isfinite(val) and val >= 0):
                raise ConfigError(f"{key} must be finite and >= 0, got {p[key]!r}")
            p[key] = val
    for key in ("omega", "beta1", "beta2"):
        if key in p:
            p[key] = float(p[key])
            if not math.isfinite(p[key]):
                raise ConfigError(f"{key} must be finite")
    if not p["omega"] > 0:
        raise ConfigError("omega must be > 0")
    for key in ("n1", "n2"):
        val = p[key]
        if isinstance(val, bool) or float(val) != int(float(val)) or int(float(val)) < 1:
            raise ConfigError(f"{key} must be a positive integer, got {val!r}")
        p[key] = int(float(val))
    for key in ("amplitude", "phase", "gamma", "eta", "energy"):
        if key in p:
            p[key] = _pair(p[key], key)
    if name in ("ml1", "ml2", "ml3", "shifted-linear"):
        if p["n1"] != p["n2"]:
            raise ConfigError(f"{name} closed forms need equal frequencies (n1 == n2)")
        if p["phase"][0] != p["phase"][1]:
            raise ConfigError(
                f"{name} orbits are straight lines; the phase must be common to both axes")
    if "energy_sign" in p and p["energy_sign"] is not None:
        if p["energy_sign"] in ("+", 1, "+1"):
            p["energy_sign"] = 1
        elif p["energy_sign"] in ("-", -1, "-1"):
            p["energy_sign"] = -1
        else:
            raise ConfigError(f"energy_sign must be '+' or '-', got {p['energy_sign']!r}")
    _validate(name, p)
    return p


def _validate(name, p):
    if name in ("ml1", "ml3", "shifted-linear", "ml2"):
        s = sum(a * a for a in p["amplitude"])
        if not 1.0 + p["sign"] * p["beta"] * s > 0:
            raise ConfigError(f"amplitude {p['amplitude']} leaves the validity domain (beta*|A|^2 >= 1)")
    if name == "ml2":
        if p["beta"] == 0 or p["xi"] == 0:
            raise ConfigError("ml2 needs beta > 0 and xi > 0 (otherwise Omega^2 = 0)")
        try:
            w2 = ml2_frequency_sq(p["amplitude"], p["omega"], p["sign"], p["beta"], p["xi"])
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        if not w2 > 0:
            raise ConfigError(f"Omega^2 = {w2:.6g} <= 0 on the sign={'+' if p['sign'] > 0 else '-'} branch; "
                              f"ml2 needs sign '-'")
    if name == "isotonic-pdm" and p["case"] not in ("auto", "isotropic", "anisotropic", "equal-beta"):
        raise ConfigError(f"case must be auto, isotropic, anisotropic or equal-beta, got {p['case']!r}")


def catalog_lookup(name: str, **overrides) -> ModelPair:
    """Fully wired :class:`ModelPair` for a catalog name, defaults overridden by keyword."""
    p = resolve_params(name, overrides)
    n = (p["n1"], p["n2"])
    w0 = p["omega"]
    if name in ("ml1", "shifted-linear", "ml2", "ml3"):
        center = tuple(-g for g in p["gamma"]) if name == "ml3" else (0.0, 0.0)
        mass = MassFunction("inverse-quadratic", p["sign"], p["beta"], center)
        if name == "ml2":
            xi_j = p["xi"] / math.sqrt(2.0)
            pot = Potential("pdm-scaled-constant", w0, n, xi=(xi_j, xi_j), mass=mass)
            ts = TransformSpec("constant-xi", mass, xi=p["xi"])
        else:
            pot = Potential("pdm-scaled-harmonic", w0, n, mass=mass)
            family = {"ml1": "radial-sqrt-m", "ml3": "shifted-radius", "shifted-linear": "radial-sqrt-m-shifted-q"}
            ts = TransformSpec(family[name], mass, eta=p.get("eta", (0.0, 0.0)))
        if name == "shifted-linear":
            ref = ReferenceModel(Potential("shifted-harmonic", w0, n, shift=p["eta"]), "shifted")
        else:
            ref = ReferenceModel(Potential("harmonic", w0, n), "linear")
        oracles = (f"pdm_{name.replace('-', '_')}" if name != "shifted-linear" else "pdm_ml1",
                   "reference_shifted" if name == "shifted-linear" else "reference_linear")
    elif name == "isotonic-pdm":
        iso = (p["beta1"], p["beta2"])
        mass = MassFunction("inverse-quadratic", p["sign"], p["lambda"])
        pot = Potential("pdm-deformed-isotonic", w0, n, iso=iso, mass=mass)
        ts = TransformSpec("radial-sqrt-m", mass)
        ref = ReferenceModel(Potential("isotonic", w0, n, iso=iso), "isotonic")
        oracles = ("pdm_isotonic_verbatim", "reference_isotonic_ep", "reference_isotonic_verbatim")
    else:
        mass = MassFunction("constant")
        if name == "linear":
            pot = Potential("harmonic", w0, n)
            oracles = ("reference_linear",)
        elif name == "shifted":
            pot = Potential("shifted-harmonic", w0, n, shift=p["eta"])
            oracles = ("reference_shifted",)
        else:
            pot = Potential("isotonic", w0, n, iso=(p["beta1"], p["beta2"]))
            oracles = ("reference_isotonic_ep", "reference_isotonic_verbatim")
        ref = ReferenceModel(pot, name)
        ts = TransformSpec("radial-sqrt-m", mass)
    pdm = PdmModel(mass, pot, name)
    return ModelPair(name, pdm, ref, ts, oracles, params=p, equations="; ".join(DESCRIPTIONS[name][:2]))


def pdm_closed_form(pair: ModelPair):
    """Closed-form x-space orbit for the pair's defaults, or ``None`` if there is none."""
    p, name = pair.params, pair.name
    if name in ("ml1", "shifted-linear"):
        return pdm_ml1(p["amplitude"], p["omega"] * p["n1"], p["sign"], p["beta"], p["phase"][0])
    if name == "ml2":
        return pdm_ml2(p["amplitude"], p["omega"] * p["n1"], p["sign"], p["beta"], p["xi"], p["phase"][0])
    if name == "ml3":
        return pdm_ml3(p["amplitude"], p["omega"] * p["n1"], p["sign"], p["beta"], p["gamma"], p["phase"][0])
    if name == "isotonic-pdm":
        omegas = (p["omega"] * p["n1"], p["omega"] * p["n2"])
        return pdm_isotonic_verbatim(p["amplitude"], omegas, p["lambda"], (p["beta1"], p["beta2"]), p["sign"],
                                  case=p["case"])
    if name in REFERENCE_MODELS:
        return reference_closed_form(pair)
    return None


def reference_closed_form(pair: ModelPair):
    """Unit-mass closed form that the mapped x-space orbit is compared with.

    The amplitude matches the mapped state at ``t = 0``: for the cosine
    families ``A sqrt(m(|A|))``. The isotonic families use the exact
    Ermakov-Pinney orbit with the configured axis energies.
    """
    p, name = pair.params, pair.name
    w = pair.reference.potential.omega
    if name in ("isotonic-pdm", "isotonic"):
        return reference_isotonic_ep(p["energy"], w, (p["beta1"], p["beta2"]), p["phase"])
    if name == "linear":
        return reference_linear(p["amplitude"], w, p["phase"])
    if name == "shifted":
        return reference_shifted(p["amplitude"], w, p["phase"], p["eta"])
    A = np.asarray(p["amplitude"])
    m0 = float(mass_value(pair.pdm.mass, A + np.asarray(pair.pdm.mass.center)))
    if name == "ml2":
        # the constant-xi image of the turning point
        amp = np.full(2, p["xi"] / math.sqrt(2.0)) * math.sqrt(m0)
    else:
        amp = A * math.sqrt(m0)
    if name == "shifted-linear":
        return reference_shifted(amp, w, p["phase"], p["eta"])
    return reference_linear(amp, w, p["phase"])


def initial_state(pair: ModelPair) -> State:
    """Default x-space initial state: the closed form at ``t = 0``.

    isotonic-pdm starts from the preimage of the Ermakov-Pinney state at
    ``tau = 0``, with ``x' = q~ / sqrt(m)``.
    """
    if pair.name == "isotonic-pdm":
        s = reference_closed_form(pair).state(0.0)
        x = inverse_point_map(pair.transform, s.position)
        v = s.velocity / math.sqrt(float(mass_value(pair.pdm.mass, x)))
        return State(x, v, 0.0)
    return pdm_closed_form(pair).state(0.0)


def model_period(pair: ModelPair) -> float:
    """Period in t used for ``periods`` durations: ``2 pi / W`` from the closed form, else ``2 pi / w``."""
    p = pair.params
    if pair.name in ("ml1", "ml2", "ml3", "shifted-linear"):
        return pdm_closed_form(pair).period
    return 2.0 * math.pi / (p["omega"] * min(p["n1"], p["n2"]))


def list_models() -> list[dict]:
    """One record per catalog entry: name, kind, equations and default parameters."""
    rows = []
    for name in MODEL_NAMES:
        lagr, orbit, transform, ref = DESCRIPTIONS[name]
        rows.append({
            "name": name,
            "kind": "pdm" if name in PDM_MODELS else "reference",
            "system": lagr,
            "closed_form": orbit,
            "transform": transform,
            "maps_to": ref,
            "defaults": dict(DEFAULTS[name]),
        })
    return rows


def isotonic_table_frequency(pair: ModelPair) -> float:
    """``W`` of the PDM-isotonic frequency table for the pair's parameters."""
    p = pair.params
    w2, _ = isotonic_frequency_sq(p["amplitude"], (p["omega"] * p["n1"], p["omega"] * p["n2"]), p["lambda"],
                                  (p["beta1"], p["beta2"]), p["case"])
    return math.sqrt(w2)
