"""Data-aware scaling law: evaluation and derivative-free fitting.

The predicted error at epoch k given cumulative samples seen n_1 <= ... <= n_k:

    y_k = a * n_1^(b_1) * prod_{j=2..k} (n_j / n_{j-1})^(b_j) + d
    b_j = b * delta^(j-1)

``a`` is a normalizing factor, ``b`` the data-utility exponent (lower means
higher utility), ``delta`` the repetition-decay factor, and ``d`` the
irreducible error floor. Under the half-life form b_j = b * (1/2)^((j-1)/tau)
one has tau = -1 / log2(delta), which is only representable for delta in
(0, 1); fits report tau = None otherwise and say so in the notes, since
reference fits elsewhere quote delta well above 1.

Fitting minimizes the sum of squared errors with Nelder-Mead simplex
descent from a small multi-start grid; a > 0, delta > 0, d in [0, 1] are
enforced by penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import FitFailureError, ValidationError
from .fileio import read_csv, round9

_PENALTY = 1e9
_BIG = 1e18

DEFAULT_START_B = (-0.3, 0.0, 0.1)
DEFAULT_START_DELTA = (0.5, 1.5, 3.0)


@dataclass
class TrainingCurve:
    epochs: np.ndarray  # int, strictly increasing, >= 1
    samples_seen: np.ndarray  # cumulative, non-decreasing, > 0
    metric: np.ndarray
    kind: str = "error"  # or "accuracy"

    def validate(self) -> "TrainingCurve":
        e = np.asarray(self.epochs, dtype=np.int64)
        n = np.asarray(self.samples_seen, dtype=np.float64)
        y = np.asarray(self.metric, dtype=np.float64)
        if not (e.size == n.size == y.size):
            raise ValidationError("epochs, samples_seen, metric lengths differ")
        if e.size == 0 or np.any(e < 1) or np.any(np.diff(e) <= 0):
            raise ValidationError("epochs must be strictly increasing and >= 1")
        if np.any(n <= 0) or np.any(np.diff(n) < 0):
            raise ValidationError("samples_seen must be positive and non-decreasing")
        if self.kind not in ("error", "accuracy"):
            raise ValidationError("kind must be 'error' or 'accuracy'")
        if not np.all(np.isfinite(y)):
            raise ValidationError("metric contains non-finite values")
        return self

    def as_error(self) -> "TrainingCurve":
        """Accuracy curves are flipped so the floor d keeps its meaning."""
        self.validate()
        if self.kind == "error":
            return self
        return TrainingCurve(
            self.epochs, self.samples_seen, 1.0 - np.asarray(self.metric, float), "error"
        )


@dataclass
class ScalingFit:
    a: float
    b: float
    delta: float
    d: float
    tau: float | None
    sse: float
    converged: bool
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "a": round9(self.a),
            "b": round9(self.b),
            "delta": round9(self.delta),
            "d": round9(self.d),
            "tau": None if self.tau is None else round9(self.tau),
            "sse": round9(self.sse),
            "converged": self.converged,
            "notes": self.notes,
        }


def predict(a: float, b: float, delta: float, d: float, samples_seen) -> np.ndarray:
    """Evaluate the product form; equal consecutive n contribute factor 1."""
    n = np.asarray(samples_seen, dtype=np.float64)
    if n.size == 0:
        raise ValidationError("samples_seen is empty")
    if np.any(n <= 0):
        raise ValidationError("samples_seen must be strictly positive")
    k = n.size
    b_j = b * np.power(float(delta), np.arange(k, dtype=np.float64))
    log_n = np.log(n)
    incr = np.empty(k)
    incr[0] = b_j[0] * log_n[0]
    if k > 1:
        incr[1:] = b_j[1:] * np.diff(log_n)
    with np.errstate(over="ignore", under="ignore"):
        return a * np.exp(np.cumsum(incr)) + d


def _tau_for(delta: float) -> float | None:
    if 0.0 < delta < 1.0:
        return -1.0 / np.log2(delta)
    return None


def default_init_grid() -> list[tuple[float, float]]:
    return [(b0, d0) for b0 in DEFAULT_START_B for d0 in DEFAULT_START_DELTA]


def _make_objective(n: np.ndarray, y: np.ndarray):
    """SSE objective with feasibility penalties, logs precomputed for speed."""
    k = n.size
    powers = np.arange(k, dtype=np.float64)
    log_n = np.log(n)
    dlog = np.empty(k)
    dlog[0] = log_n[0]
    if k > 1:
        dlog[1:] = np.diff(log_n)

    def objective(params: np.ndarray) -> float:
        a, b, delta, d = params
        pen = 0.0
        if a <= 0.0:
            pen += _PENALTY * (1.0 + a * a)
            a = 1e-12
        if delta <= 0.0:
            pen += _PENALTY * (1.0 + delta * delta)
            delta = 1e-12
        if d < 0.0:
            pen += _PENALTY * (1.0 + d * d)
            d = 0.0
        elif d > 1.0:
            pen += _PENALTY * (1.0 + (d - 1.0) ** 2)
            d = 1.0
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            exponent = np.cumsum(b * np.power(delta, powers) * dlog)
            resid = a * np.exp(exponent) + d - y
            sse = float(resid @ resid)
        if not np.isfinite(sse):
            return _BIG + pen
        return sse + pen

    return objective


def fit_scaling(curve: TrainingCurve, init_grid=None) -> ScalingFit:
    """Best-of-starts Nelder-Mead fit of (a, b, delta, d) to an error curve.

    ``init_grid`` is a list of (b0, delta0) starting points; a and d start
    from data-driven guesses. Starts are ranked by final SSE with ties
    going to the earliest start, so the result is independent of any
    parallel execution order. Raises FitFailureError when every start ends
    non-finite.
    """
    curve = curve.as_error().validate()
    n = np.asarray(curve.samples_seen, dtype=np.float64)
    y = np.asarray(curve.metric, dtype=np.float64)
    if y.size < 5:
        raise ValidationError(f"need >= 5 observations, got {y.size}")
    starts = list(init_grid) if init_grid is not None else default_init_grid()
    if not starts:
        raise ValidationError("init_grid is empty")

    objective = _make_objective(n, y)
    d0 = float(np.clip(0.8 * y.min(), 0.0, 1.0))
    coarse: list[tuple[float, int, np.ndarray]] = []
    for idx, (b0, delta0) in enumerate(starts):
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            a0 = (y[0] - d0) * n[0] ** (-b0)
        if not np.isfinite(a0) or a0 <= 0:
            a0 = max(float(y[0]), 1e-3)
        x0 = np.array([a0, b0, delta0, d0], dtype=np.float64)
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 300, "maxfev": 300},
        )
        if np.isfinite(res.fun) and res.fun < _BIG:
            coarse.append((float(res.fun), idx, res.x.copy()))
    if not coarse:
        raise FitFailureError("every start produced a non-finite objective")

    # refine the three most promising starts to high precision
    coarse.sort(key=lambda t: (t[0], t[1]))
    best: tuple[float, int, np.ndarray, bool] | None = None
    for _, idx, x0 in coarse[:3]:
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2500, "maxfev": 2500},
        )
        res2 = minimize(
            objective,
            res.x,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 1200, "maxfev": 1200},
        )
        if res2.fun <= res.fun:
            res = res2
        if not np.isfinite(res.fun) or res.fun >= _BIG:
            continue
        if best is None or res.fun < best[0] or (res.fun == best[0] and idx < best[1]):
            best = (float(res.fun), idx, res.x.copy(), bool(res.success))
    if best is None:
        raise FitFailureError("every start produced a non-finite objective")

    sse, _, x, success = best
    a, b, delta, d = (float(v) for v in x)
    delta = max(delta, 1e-12)
    a = max(a, 1e-12)
    d = float(np.clip(d, 0.0, 1.0))
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        yhat = predict(a, b, delta, d, n)
        resid = yhat - y
        sse = float(resid @ resid)
    tau = _tau_for(delta)
    notes = ""
    if tau is None:
        notes = (
            "delta >= 1: half-life tau = -1/log2(delta) not representable; "
            "delta treated as a free positive parameter"
        )
    return ScalingFit(a, b, delta, d, tau, sse, success, notes)


def read_curve_csv(path, kind: str = "error") -> TrainingCurve:
    header, rows = read_csv(Path(path))
    if header != ["epoch", "samples_seen", "metric"]:
        raise ValidationError(f"{path}: expected header epoch,samples_seen,metric")
    e = np.array([int(r[0]) for r in rows])
    n = np.array([float(r[1]) for r in rows])
    y = np.array([float(r[2]) for r in rows])
    return TrainingCurve(e, n, y, kind).validate()
