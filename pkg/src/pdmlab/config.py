"""Experiment configuration: a YAML mapping with one nesting level.

Grammar (all keys optional except ``model``)::

    model: ml1                 # catalog name
    sign: "+"                  # "+" / "-" mass sign
    beta: 0.1                  # mass deformation (ML families)
    lambda: 0.1                # mass deformation (isotonic-pdm)
    omega: 1.0                 # base frequency w0
    n1: 1                      # integer multipliers, w_j = n_j w0
    n2: 1
    xi: 2.0                    # ml2 constant
    gamma: [0.5, 0.0]          # ml3 shift
    eta: [0.5, 0.0]            # shifted-linear / shifted shift
    beta1: 0.75                # isotonic strengths
    beta2: 0.5
    energy: [1.0, 1.0]         # isotonic axis energies
    case: auto                 # isotonic frequency row: auto | isotropic | anisotropic | equal-beta
    energy_sign: "+"           # sign inside the printed isotonic energy formula
    amplitude: [1.0, 0.5]      # closed-form amplitudes A_j
    phase: 0.0                 # scalar or per-axis pair
    position: [1.0, 0.5]       # raw initial state; replaces the closed-form start
    velocity: [0.0, 0.0]
    periods: 10                # duration in model periods ...
    time: 60.0                 # ... or absolute (mutually exclusive)
    monitor: [E_tot, E_x1, E_x2]
    seed: 0
    integrator:
      method: adaptive-rk45    # or fixed-rk4
      h: 1.0e-3
      rtol: 1.0e-10
      atol: 1.0e-10
      max_steps: 1000000
      output_dt: null          # uniform output stride; null keeps accepted steps
    output:
      dir: out
      format: both             # csv | json | both

Numbers written without a decimal point in exponent form (``1e-10``) are
accepted. There is no expression evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .catalog import MODEL_NAMES, resolve_params
from .dynamics import METHODS, IntegratorConfig
from .errors import CatalogError, ConfigError, ParameterError

PARAM_KEYS = ("sign", "beta", "lambda", "omega", "n1", "n2", "xi", "gamma", "eta", "beta1", "beta2", "energy",
              "case", "energy_sign", "amplitude", "phase")
RUN_KEYS = ("model", "position", "velocity", "periods", "time", "monitor", "seed", "integrator", "output")
INTEGRATOR_KEYS = ("method", "h", "rtol", "atol", "max_steps", "output_dt")
OUTPUT_KEYS = ("dir", "format")
FORMATS = ("csv", "json", "both")
MONITORS = ("E_tot", "E_x1", "E_x2", "I1", "I2", "I3", "I4", "absQ12", "argQ12")
DEFAULT_MONITOR = ("E_tot", "E_x1", "E_x2")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    position: tuple | None = None
    velocity: tuple | None = None
    periods: float | None = 10.0
    time: float | None = None
    monitor: tuple = DEFAULT_MONITOR
    seed: int = 0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output_dir: str = "out"
    output_format: str = "both"

    def to_dict(self) -> dict:
        cfg = self.integrator
        return {
            "model": self.model,
            "params": _jsonable(self.params),
            "position": list(self.position) if self.position else None,
            "velocity": list(self.velocity) if self.velocity else None,
            "periods": self.periods,
            "time": self.time,
            "monitor": list(self.monitor),
            "seed": self.seed,
            "integrator": {"method": cfg.method, "h": cfg.h, "rtol": cfg.rtol, "atol": cfg.atol,
                           "max_steps": cfg.max_steps, "output_dt": cfg.output_dt},
        }


def _jsonable(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _where(mark):
    return f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "command line"


def _float(val, key, mark=None, positive=False):
    if isinstance(val, bool):
        raise ConfigError(f"{key} must be a number ({_where(mark)})")
    try:
        out = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {val!r} ({_where(mark)})") from None
    if not math.isfinite(out) or (positive and not out > 0):
        raise ConfigError(f"{key} must be finite{' and > 0' if positive else ''}, got {val!r} ({_where(mark)})")
    return out


def _number_or_pair(val, key, mark):
    if isinstance(val, (list, tuple)):
        if len(val) != 2:
            raise ConfigError(f"{key} must have two entries ({_where(mark)})")
        return tuple(_float(v, key, mark) for v in val)
    return _float(val, key, mark)


def parse_config(text: str, overrides: list[str] | tuple = ()) -> ExperimentConfig:
    """Parse and validate a config document, then apply ``key=value`` overrides.

    Syntax errors raise :class:`ConfigError` with line and column; unknown
    keys and invalid values name the offending key.
    """
    try:
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"config parse error at {_where(mark)}: {exc.problem}") from None
    if root is None:
        raw, marks = {}, {}
    else:
        if not isinstance(root, yaml.MappingNode):
            raise ConfigError(f"config must be a mapping ({_where(root.start_mark)})")
        raw, marks = _mapping(root, "")
    for item in overrides:
        key, val = _split_override(item)
        _assign(raw, key, val)
        marks.setdefault(key, None)
    return _build(raw, marks)


def _mapping(node, prefix):
    out, marks = {}, {}
    seen = set()
    for knode, vnode in node.value:
        key = knode.value
        full = f"{prefix}{key}"
        if key in seen:
            raise ConfigError(f"duplicate key {full!r} at {_where(knode.start_mark)}")
        seen.add(key)
        marks[full] = knode.start_mark
        if isinstance(vnode, yaml.MappingNode):
            if prefix:
                raise ConfigError(f"{full!r} nests too deep ({_where(knode.start_mark)})")
            sub, submarks = _mapping(vnode, f"{full}.")
            out[key] = sub
            marks.update(submarks)
        else:
            out[key] = yaml.safe_load(yaml.serialize(vnode))
    return out, marks


def _split_override(item):
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, text = item.split("=", 1)
    key = key.strip()
    try:
        val = yaml.safe_load(text) if text.strip() else None
    except yaml.YAMLError:
        raise ConfigError(f"cannot parse --set value {text!r} for {key!r}") from None
    return key, val


def _assign(raw, key, val):
    parts = key.split(".")
    if len(parts) > 2:
        raise ConfigError(f"override key {key!r} nests too deep")
    if len(parts) == 2:
        block = raw.setdefault(parts[0], {})
        if not isinstance(block, dict):
            raise ConfigError(f"{parts[0]!r} is not a block")
        block[parts[1]] = val
    else:
        raw[key] = val


def _build(raw, marks) -> ExperimentConfig:
    for key in raw:
        if key not in PARAM_KEYS and key not in RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} at {_where(marks.get(key))}")
    if "model" not in raw:
        raise ConfigError("missing required key 'model'")
    model = raw["model"]
    if not isinstance(model, str) or model not in MODEL_NAMES:
        raise CatalogError(f"unknown model {model!r}; valid names: {', '.join(MODEL_NAMES)}")

    overrides = {}
    for key in PARAM_KEYS:
        if key in raw:
            val = raw[key]
            m = marks.get(key)
            if key in ("gamma", "eta", "energy", "amplitude", "phase"):
                val = _number_or_pair(val, key, m)
            elif key in ("beta", "lambda", "omega", "xi", "beta1", "beta2"):
                val = _float(val, key, m)
            elif key in ("sign", "energy_sign"):
                val = str(val) if not isinstance(val, int) or isinstance(val, bool) else val
            overrides[key] = val
    try:
        params = resolve_params(model, overrides)
    except (ConfigError, ParameterError) as exc:
        bad = next((k for k in overrides if f"{k!r}" in str(exc) or str(exc).startswith(k)), None)
        where = f" ({_where(marks.get(bad))})" if bad else ""
        raise ConfigError(f"{exc}{where}") from None

    position = velocity = None
    if "position" in raw or "velocity" in raw:
        position = _number_or_pair(raw.get("position", (0.0, 0.0)), "position", marks.get("position"))
        velocity = _number_or_pair(raw.get("velocity", (0.0, 0.0)), "velocity", marks.get("velocity"))
        position = position if isinstance(position, tuple) else (position, position)
        velocity = velocity if isinstance(velocity, tuple) else (velocity, velocity)

    periods, time = 10.0, None
    if "time" in raw and raw["time"] is not None:
        if raw.get("periods") is not None:
            raise ConfigError("give either 'periods' or 'time', not both")
        time, periods = _float(raw["time"], "time", marks.get("time"), positive=True), None
    elif raw.get("periods") is not None:
        periods = _float(raw["periods"], "periods", marks.get("periods"), positive=True)

    monitor = raw.get("monitor", DEFAULT_MONITOR)
    if isinstance(monitor, str):
        monitor = [monitor]
    if not isinstance(monitor, (list, tuple)):
        raise ConfigError(f"monitor must be a list ({_where(marks.get('monitor'))})")
    for name in monitor:
        if name not in MONITORS:
            raise ConfigError(f"unknown monitored quantity {name!r}; choose from {', '.join(MONITORS)} "
                              f"({_where(marks.get('monitor'))})")

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer ({_where(marks.get('seed'))})")

    integ = _integrator(raw.get("integrator") or {}, marks)
    out = raw.get("output") or {}
    if not isinstance(out, dict):
        raise ConfigError(f"output must be a mapping ({_where(marks.get('output'))})")
    for key in out:
        if key not in OUTPUT_KEYS:
            raise ConfigError(f"unknown key 'output.{key}' at {_where(marks.get('output.' + key))}")
    fmt = out.get("format", "both")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS} ({_where(marks.get('output.format'))})")

    return ExperimentConfig(model, params, overrides, position, velocity, periods, time, tuple(monitor), seed,
                            integ, str(out.get("dir", "out")), fmt)


def _integrator(block, marks) -> IntegratorConfig:
    if not isinstance(block, dict):
        raise ConfigError(f"integrator must be a mapping ({_where(marks.get('integrator'))})")
    kw = {}
    for key, val in block.items():
        m = marks.get(f"integrator.{key}")
        if key not in INTEGRATOR_KEYS:
            raise ConfigError(f"unknown key 'integrator.{key}' at {_where(m)}")
        if key == "method":
            if val not in METHODS:
                raise ConfigError(f"integrator.method must be one of {METHODS} ({_where(m)})")
            kw[key] = val
        elif key == "max_steps":
            if isinstance(val, bool) or float(val) != int(float(val)):
                raise ConfigError(f"integrator.max_steps must be an integer ({_where(m)})")
            kw[key] = int(float(val))
        elif key == "output_dt":
            kw[key] = None if val is None else _float(val, "integrator.output_dt", m, positive=True)
        else:
            kw[key] = _float(val, f"integrator.{key}", m)
    try:
        return IntegratorConfig(**kw)
    except ParameterError as exc:
        raise ConfigError(f"integrator: {exc}") from None
