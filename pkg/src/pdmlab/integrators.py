"""Explicit Runge-Kutta integrators for second-order systems ``x'' = a(x, x', t``).

Two independent schemes: classical fixed-step RK4 and the Dormand-Prince
5(4) embedded pair with PI step-size control. Both emit samples either at
every step or on a uniform grid: cubic Hermite interpolation for RK4 and the
pair's own 4th-order continuous extension for Dormand-Prince.
"""

from __future__ import annotations

import math

import numpy as np

from .dynamics import Acceleration, IntegratorConfig, State, Trajectory
from .errors import DomainError, InputError, ParameterError, StepLimitError, TruncatedTrajectoryError

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6] + (0.0,)
# difference between the 5th- and embedded 4th-order weights
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

# Shampine's 4th-order continuous extension of the pair, coefficients of s, s^2, s^3, s^4
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


def _rhs(accel: Acceleration):
    def f(t, y):
        a = accel(y[:2], y[2:], t)
        out = np.empty(4)
        out[:2] = y[2:]
        out[2:] = a
        if not np.all(np.isfinite(out)):
            raise DomainError(f"non-finite derivative at t={t!r}")
        return out

    return f


def integrate(accel: Acceleration, init: State, t_end: float, cfg: IntegratorConfig | None = None,
              label: str = "") -> Trajectory:
    """Integrate from ``init`` to ``t_end``.

    Raises :class:`TruncatedTrajectoryError` if the solution leaves the
    model's validity domain, and :class:`StepLimitError` when ``max_steps``
    is exhausted; both carry the partial trajectory.
    """
    cfg = cfg or IntegratorConfig()
    t0 = float(init.time)
    t_end = float(t_end)
    if not t_end > t0:
        raise ParameterError("t_end must exceed the initial time")
    rhs = _rhs(accel)
    y0 = init.vector
    try:
        f0 = rhs(t0, y0)
    except (DomainError, InputError) as exc:
        raise TruncatedTrajectoryError(f"initial state outside the validity domain: {exc}") from exc

    steps_t, steps_y, steps_f = [t0], [y0], [f0]
    stages = []
    stats = {"accepted": 0, "rejected": 0, "evaluations": 1}
    meta = {"method": cfg.method}

    def partial():
        return _assemble(steps_t, steps_y, steps_f, None, label, dict(meta, truncated=True, **stats), strict=False)

    try:
        if cfg.method == "fixed-rk4":
            meta["h"] = cfg.h
            _run_rk4(rhs, t_end, cfg, steps_t, steps_y, steps_f, stats)
        else:
            meta.update(rtol=cfg.rtol, atol=cfg.atol)
            _run_dopri(rhs, t_end, cfg, steps_t, steps_y, steps_f, stats, stages)
    except (DomainError, InputError) as exc:
        raise TruncatedTrajectoryError(
            f"trajectory left the validity domain near t={steps_t[-1]:.6g}: {exc}", partial()
        ) from exc
    except StepLimitError as exc:
        raise StepLimitError(str(exc), partial()) from None

    meta.update(stats)
    return _assemble(steps_t, steps_y, steps_f, cfg.output_dt, label, meta, stages=stages or None)


def _run_rk4(rhs, t_end, cfg, ts, ys, fs, stats):
    t, y, k1 = ts[-1], ys[-1], fs[-1]
    n_total = int(math.ceil((t_end - t) / cfg.h - 1e-9))
    if n_total > cfg.max_steps:
        raise StepLimitError(f"fixed-rk4 needs {n_total} steps, max_steps={cfg.max_steps}")
    for i in range(n_total):
        t_next = t_end if i == n_total - 1 else ts[0] + (i + 1) * cfg.h
        h = t_next - t
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_next
        k1 = rhs(t, y)
        stats["evaluations"] += 4
        stats["accepted"] += 1
        ts.append(t)
        ys.append(y)
        fs.append(k1)


def _rms(v):
    return math.sqrt(float(np.mean(v * v)))


def _initial_step(rhs, t0, y0, f0, t_end, rtol, atol, stats):
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    stats["evaluations"] += 1
    d2 = _rms((f1 - f0) / scale) / h0
    dmax = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dmax <= 1e-15 else (0.01 / dmax) ** 0.2
    return min(100.0 * h0, h1, t_end - t0)


def _run_dopri(rhs, t_end, cfg, ts, ys, fs, stats, stages):
    rtol, atol = cfg.rtol, cfg.atol
    t, y, k1 = ts[-1], ys[-1], fs[-1]
    try:
        h = _initial_step(rhs, t, y, k1, t_end, rtol, atol, stats)
    except (DomainError, InputError):
        h = 1e-6 * max(1.0, abs(t_end - t))
    err_prev = 1e-4
    rejected_last = False
    span = abs(t_end) + abs(t)
    while t < t_end:
        if stats["accepted"] >= cfg.max_steps:
            raise StepLimitError(f"max_steps={cfg.max_steps} exhausted at t={t:.6g}")
        if h < 1e-14 * max(1.0, span):
            raise DomainError(f"step size underflow (h={h:.3g})")
        last = t + h >= t_end
        if last:
            h = t_end - t
        try:
            k = [k1]
            for i in range(1, 7):
                yi = y.copy()
                for a, kj in zip(_A[i], k):
                    if a:
                        yi += h * a * kj
                k.append(rhs(t + _C[i] * h, yi))
            stats["evaluations"] += 6
        except (DomainError, InputError):
            # trial stage left the domain: shrink and retry from the same point
            stats["rejected"] += 1
            rejected_last = True
            h *= 0.25
            continue
        y_new = y.copy()
        for b, kj in zip(_B, k):
            if b:
                y_new += h * b * kj
        err_vec = np.zeros_like(y)
        for e, kj in zip(_E, k):
            if e:
                err_vec += h * e * kj
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / scale)
        if err <= 1.0:
            t = t_end if last else t + h
            y, k1 = y_new, k[6]
            ts.append(t)
            ys.append(y)
            fs.append(k1)
            stages.append(np.array(k))
            stats["accepted"] += 1
            if err == 0.0:
                fac = _FAC_MAX
            else:
                fac = _SAFETY * err ** (-_ALPHA) * err_prev**_BETA
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            h *= fac
            err_prev = max(err, 1e-4)
            rejected_last = False
        else:
            stats["rejected"] += 1
            rejected_last = True
            h *= max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))


def hermite(ts, ys, fs, t_out) -> np.ndarray:
    """Cubic Hermite interpolation of step data at ``t_out``."""
    ts = np.asarray(ts)
    ys = np.asarray(ys)
    fs = np.asarray(fs)
    t_out = np.asarray(t_out, dtype=float)
    idx = np.clip(np.searchsorted(ts, t_out, side="right") - 1, 0, ts.size - 2)
    h = (ts[idx + 1] - ts[idx])[:, None]
    s = ((t_out - ts[idx]) / h[:, 0])[:, None]
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * ys[idx] + h10 * h * fs[idx] + h01 * ys[idx + 1] + h11 * h * fs[idx + 1]


def dopri_dense(ts, ys, stages, t_out) -> np.ndarray:
    """Evaluate the Dormand-Prince continuous extension at ``t_out``."""
    ts = np.asarray(ts)
    ys = np.asarray(ys)
    t_out = np.asarray(t_out, dtype=float)
    idx = np.clip(np.searchsorted(ts, t_out, side="right") - 1, 0, ts.size - 2)
    out = np.empty((t_out.size, ys.shape[1]))
    for n, (i, t) in enumerate(zip(idx, t_out)):
        h = ts[i + 1] - ts[i]
        s = (t - ts[i]) / h
        powers = np.array([s, s * s, s**3, s**4])
        out[n] = ys[i] + h * (stages[i].T @ (_P @ powers))
    return out


def output_grid(t0: float, t_end: float, dt: float) -> np.ndarray:
    n = int(math.floor((t_end - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(n + 1)
    if t_end - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t_end)
    else:
        grid[-1] = t_end
    return grid


def _assemble(ts, ys, fs, output_dt, label, meta, strict=True, stages=None) -> Trajectory:
    ts_a = np.asarray(ts)
    ys_a = np.asarray(ys)
    if output_dt is not None and ts_a.size >= 2:
        grid = output_grid(ts_a[0], ts_a[-1], output_dt)
        if stages is not None:
            ys_a = dopri_dense(ts_a, ys_a, stages, grid)
            kind = "dopri-continuous-extension"
        else:
            ys_a = hermite(ts_a, ys_a, fs, grid)
            kind = "cubic-hermite"
        ys_a[0], ys_a[-1] = ys[0], ys[-1]
        ts_a = grid
        meta = dict(meta, output_dt=output_dt, interpolation=kind)
    return Trajectory(ts_a, ys_a[:, :2], ys_a[:, 2:], label=label, meta=meta, strict=strict)
