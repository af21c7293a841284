"""Per-sample importance scores over prediction trajectories.

Implements prediction-error norms over hard labels and fixed teacher soft
labels, forgetting counts, sliding-window score uncertainty, and the
compute-aware difficulty score that averages the uncertainty of the
per-epoch error norm over the last windows of a compute-matched run:

    U_k(x)   = sample std (denominator J - 1) of the score series over
               epochs [k, k + J)
    CAD(x)   = mean of U_k(x) for k in [K - J - W, K - J)

``kl_gradient_check`` numerically confirms the identity behind the
soft-label score: the logit gradient of the temperature-T KL loss equals
(1/T)(p - q), so the gradient-norm importance of a sample reduces (up to a
constant) to (1/T)||p - q||.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, ValidationError
from .fileio import fmt9, read_csv, write_csv, write_json
from .trajstore import ROW_SUM_TOL, TrajectoryTensor

METHODS = ("el2n", "el2n_sl", "forgetting", "dyn_unc", "cad")


@dataclass
class ScoreParams:
    """Windowing parameters for uncertainty-based scores.

    J is the uncertainty window length (epochs), W the number of trailing
    windows averaged into the final score, K the compute-matched epoch
    count, and T the softmax temperature for soft-label scoring. The
    defaults follow the reference configuration (W=2, J=6).
    """

    J: int = 6
    W: int = 2
    K: int | None = None
    T: float = 1.0
    base: str = "el2n"  # or "target_prob"

    def resolved_k(self, E: int) -> int:
        K = self.K if self.K is not None else E
        if self.J < 2:
            raise ValidationError("J must be >= 2")
        if self.W < 1:
            raise ValidationError("W must be >= 1")
        if self.T <= 0:
            raise ValidationError("T must be positive")
        if K > E:
            raise ValidationError(f"K={K} exceeds stored epochs E={E}")
        if K - self.J - self.W < 0:
            raise ValidationError(
                f"K - J - W must be >= 0 (got {K} - {self.J} - {self.W})"
            )
        if self.base not in ("el2n", "target_prob"):
            raise ValidationError("base must be 'el2n' or 'target_prob'")
        return K


@dataclass
class ScoreTable:
    """Per-sample scores for one (method, config) pair."""

    method: str
    config: dict
    scores: dict[str, float]
    source_manifest_checksum: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        bad = [s for s, v in self.scores.items() if not np.isfinite(v) or v < 0]
        if bad:
            raise ValidationError(f"non-finite or negative scores for {bad[:5]}")

    def values_for(self, sample_ids) -> np.ndarray:
        return np.array([self.scores[s] for s in sample_ids], dtype=np.float64)

    def to_csv(self, path) -> Path:
        path = Path(path)
        rows = [[sid, fmt9(v)] for sid, v in sorted(self.scores.items())]
        write_csv(path, ["sample_id", "score"], rows)
        sidecar = {
            "method": self.method,
            "config": self.config,
            "source_manifest_checksum": self.source_manifest_checksum,
        }
        write_json(path.with_suffix(".json"), sidecar)
        return path

    @classmethod
    def from_csv(cls, path) -> "ScoreTable":
        import json

        path = Path(path)
        header, rows = read_csv(path)
        if header != ["sample_id", "score"]:
            raise ValidationError(f"{path}: expected header sample_id,score")
        scores = {sid: float(v) for sid, v in rows}
        method, config, checksum = "el2n", {}, ""
        sidecar = path.with_suffix(".json")
        if sidecar.is_file():
            obj = json.loads(sidecar.read_text())
            method = obj.get("method", method)
            config = obj.get("config", config)
            checksum = obj.get("source_manifest_checksum", checksum)
        return cls(method, config, scores, checksum)


def _make_table(method, config, traj, values) -> ScoreTable:
    scores = {sid: float(v) for sid, v in zip(traj.sample_ids, values)}
    return ScoreTable(method, config, scores, traj.manifest_checksum)


def _resolve_range(traj, epoch_range) -> tuple[int, int]:
    if epoch_range is None:
        return 0, traj.E - 1
    e0, e1 = int(epoch_range[0]), int(epoch_range[1])
    if not (0 <= e0 <= e1 < traj.E):
        raise ValidationError(f"epoch range [{e0}, {e1}] invalid for E={traj.E}")
    return e0, e1


def el2n_series(traj: TrajectoryTensor) -> np.ndarray:
    """Per-epoch ||p - onehot(y)||_2, float64 [E, N]."""
    d = traj.probs.astype(np.float64).copy()
    d[:, np.arange(traj.N), traj.labels.astype(np.intp)] -= 1.0
    return np.linalg.norm(d, axis=2)


def el2n(traj: TrajectoryTensor, epoch_range=None) -> ScoreTable:
    """Mean prediction-error norm against the hard label over an epoch range."""
    e0, e1 = _resolve_range(traj, epoch_range)
    vals = el2n_series(traj)[e0 : e1 + 1].mean(axis=0)
    return _make_table("el2n", {"epoch_range": [e0, e1]}, traj, vals)


def el2n_sl(traj: TrajectoryTensor, T: float, epoch_range=None) -> ScoreTable:
    """Soft-label analogue: (1/T) * mean ||p - q||_2 with q fixed per sample."""
    if traj.teacher_probs is None:
        raise ValidationError("el2n_sl requires teacher_probs in the trajectory")
    if T <= 0:
        raise ValidationError("T must be positive")
    e0, e1 = _resolve_range(traj, epoch_range)
    d = traj.probs.astype(np.float64) - traj.teacher_probs.astype(np.float64)[None]
    vals = np.linalg.norm(d[e0 : e1 + 1], axis=2).mean(axis=0) / T
    return _make_table("el2n_sl", {"T": T, "epoch_range": [e0, e1]}, traj, vals)


def kl_gradient_check(p, q, T: float, step: float = 1e-5) -> float:
    """Max |finite-difference - analytic| logit gradient of the KL loss.

    The loss is KL(q || softmax(f / T)) as a function of logits f, with f
    reconstructed so that its temperature-T softmax reproduces p (unique up
    to an additive constant). The analytic gradient is (1/T)(p - q).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValidationError("p and q must be 1-D vectors of equal length")
    if T <= 0:
        raise ValidationError("T must be positive")
    for name, row in (("p", p), ("q", q)):
        if np.any(row < 0) or abs(row.sum() - 1.0) > ROW_SUM_TOL:
            raise ValidationError(f"{name} is not a normalized probability vector")
    if np.any(p == 0.0):
        raise DomainError("p has a zero entry; log p is undefined")

    f = T * np.log(p)

    def loss(fv: np.ndarray) -> float:
        z = fv / T
        z = z - z.max()
        logp = z - np.log(np.exp(z).sum())
        mask = q > 0
        return float(np.sum(q[mask] * (np.log(q[mask]) - logp[mask])))

    grad_fd = np.empty_like(f)
    for k in range(f.size):
        up, dn = f.copy(), f.copy()
        up[k] += step
        dn[k] -= step
        grad_fd[k] = (loss(up) - loss(dn)) / (2.0 * step)
    return float(np.max(np.abs(grad_fd - (p - q) / T)))


def forgetting(traj: TrajectoryTensor) -> ScoreTable:
    """Count of learned-to-forgotten transitions; never-learned samples get E.

    A transition at epoch e means argmax p[e] equals the label while
    argmax p[e+1] does not. Samples that are never classified correctly
    receive the maximal score E (treated as always forgotten).
    """
    if traj.E < 2:
        raise ValidationError("forgetting requires at least 2 epochs")
    correct = traj.probs.argmax(axis=2) == traj.labels.astype(np.int64)[None, :]
    counts = (correct[:-1] & ~correct[1:]).sum(axis=0).astype(np.float64)
    counts[~correct.any(axis=0)] = float(traj.E)
    return _make_table("forgetting", {}, traj, counts)


def uncertainty_series(score_series, J: int) -> np.ndarray:
    """Sliding sample standard deviation (denominator J - 1) of a score series.

    Input of length K yields K - J + 1 values; U_k covers epochs [k, k + J).
    Also accepts a [n, K] matrix and returns [n, K - J + 1].
    """
    s = np.asarray(score_series, dtype=np.float64)
    if J < 2:
        raise ValidationError("J must be >= 2")
    if s.shape[-1] < J:
        raise ValidationError(f"series length {s.shape[-1]} < J={J}")
    w = sliding_window_view(s, J, axis=-1)
    # shifting by the window's first value leaves the std unchanged but makes
    # constant windows come out exactly zero
    return (w - w[..., :1]).std(axis=-1, ddof=1)


def cad_from_series(score_series, J: int, W: int, K: int) -> np.ndarray:
    """Mean uncertainty over windows k in [K-J-W, K-J) of the first K epochs.

    Shared windowing path for the compute-aware score: callers supply any
    per-epoch base series (error norm, target-class probability, ...).
    """
    s = np.asarray(score_series, dtype=np.float64)
    if K > s.shape[-1]:
        raise ValidationError(f"K={K} exceeds series length {s.shape[-1]}")
    if K - J - W < 0:
        raise ValidationError(f"K - J - W must be >= 0 (got {K} - {J} - {W})")
    u = uncertainty_series(s[..., :K], J)
    return u[..., K - J - W : K - J].mean(axis=-1)


def dyn_unc(traj: TrajectoryTensor, J: int = 6) -> ScoreTable:
    """Mean sliding-window uncertainty of the target-class probability.

    Averages U_k over every window of the full stored run, so oscillating
    samples score strictly above flat ones.
    """
    if traj.E < J:
        raise ValidationError(f"E={traj.E} < J={J}")
    series = traj.target_prob_series().T  # [N, E]
    vals = uncertainty_series(series, J).mean(axis=-1)
    return _make_table("dyn_unc", {"J": J}, traj, vals)


def cad_prune(traj: TrajectoryTensor, params: ScoreParams) -> ScoreTable:
    """Compute-aware difficulty: trailing-window uncertainty of the error norm.

    The base series is the per-epoch error norm by default (set
    ``params.base = "target_prob"`` for the probability variant, raw values
    in both cases), restricted to the compute-matched first K epochs.
    """
    K = params.resolved_k(traj.E)
    if params.base == "el2n":
        series = el2n_series(traj).T  # [N, E]
    else:
        series = traj.target_prob_series().T
    vals = cad_from_series(series, params.J, params.W, K)
    config = {"J": params.J, "W": params.W, "K": K, "T": params.T, "base": params.base}
    return _make_table("cad", config, traj, vals)
