"""Distillation loss objectives evaluated on exported artifacts.

Four families, each computed exactly as typeset in their source methods:

* trajectory matching: ||theta_hat_(t+N) - theta_(t+M)||^2 / ||theta_t - theta_(t+M)||^2
* batch-norm statistics matching: sum_l ||mu_l - RM_l|| + lambda_var * sum_l ||var_l - RV_l||
  (unsquared L2 norms; a ``squared`` flag covers the squaring variant some
  implementations use)
* distribution matching: mean over aligned (model, augmentation) tags of
  the squared distance between mean real and mean synthetic embeddings
* gradient matching: layerwise cosine distance summed over layers

Parameter vectors travel as flat float32 little-endian files; statistics,
features, and gradients as JSON with nested numeric arrays (desk scale).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DegenerateTrajectoryError,
    NumericalError,
    ValidationError,
)
from .fileio import atomic_write_bytes, write_json

TM_DENOMINATOR_EPS = 1e-12


@dataclass
class ParamVector:
    """Flattened model parameters tagged with their training step."""

    tag: str
    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.size)


def save_param_vector(vec: ParamVector, path) -> Path:
    v = np.ascontiguousarray(vec.values, dtype="<f4")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"parameter vector {vec.tag!r} has non-finite entries")
    return atomic_write_bytes(path, v.tobytes())


def load_param_vector(path, tag: str = "") -> ParamVector:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no parameter file {path}")
    raw = path.read_bytes()
    if len(raw) % 4 != 0:
        raise DataError(f"{path}: length {len(raw)} is not a multiple of 4")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return ParamVector(tag or path.stem, values)


def write_param_index(dir_path, entries: dict[str, ParamVector]) -> Path:
    idx = {tag: {"file": f"theta_{tag}.bin", "dim": v.dim} for tag, v in entries.items()}
    return write_json(Path(dir_path) / "theta_index.json", {"vectors": idx})


def _as_values(v) -> np.ndarray:
    if isinstance(v, ParamVector):
        v = v.values
    arr = np.asarray(v, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValidationError("parameter vector has non-finite entries")
    return arr


def tm_loss(theta_t, theta_tM, theta_hat_tN) -> float:
    """Normalized squared parameter-distance ratio between student and expert.

    Zero when the student lands exactly on the expert endpoint, one when it
    never leaves the shared start. Raises DegenerateTrajectoryError when the
    expert barely moved (denominator below 1e-12), since the ratio cannot
    even be formed then.
    """
    start, expert, student = map(_as_values, (theta_t, theta_tM, theta_hat_tN))
    if not (start.size == expert.size == student.size):
        raise ValidationError(
            f"dimension mismatch: {start.size}, {expert.size}, {student.size}"
        )
    den = float(np.sum((start - expert) ** 2))
    if den < TM_DENOMINATOR_EPS:
        raise DegenerateTrajectoryError(
            f"expert movement {den:.3e} below {TM_DENOMINATOR_EPS}; ratio undefined"
        )
    num = float(np.sum((student - expert) ** 2))
    return num / den


def tm_loss_averaged(experts, student_endpoints) -> float:
    """Mean trajectory-matching loss over aligned (start, expert) pairs."""
    experts = list(experts)
    students = list(student_endpoints)
    if not experts:
        raise ValidationError("no expert pairs supplied")
    if len(experts) != len(students):
        raise ValidationError(
            f"{len(experts)} expert pairs vs {len(students)} student endpoints"
        )
    losses = [tm_loss(t, tm, hat) for (t, tm), hat in zip(experts, students)]
    return float(np.mean(losses))


@dataclass
class LayerStat:
    name: str
    mean: np.ndarray
    var: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


def _layer_arrays(layer: LayerStat):
    arrs = [
        np.asarray(a, dtype=np.float64).ravel()
        for a in (layer.mean, layer.var, layer.running_mean, layer.running_var)
    ]
    dims = {a.size for a in arrs}
    if len(dims) != 1:
        raise ValidationError(f"layer {layer.name!r}: vector lengths differ")
    if np.any(arrs[1] < 0) or np.any(arrs[3] < 0):
        raise ValidationError(f"layer {layer.name!r}: negative variance")
    for a in arrs:
        if not np.all(np.isfinite(a)):
            raise ValidationError(f"layer {layer.name!r}: non-finite statistics")
    return arrs


def bn_matching_loss(layers, lambda_var: float = 1.0, squared: bool = False) -> float:
    """Statistics-matching loss against reference running mean/variance."""
    layers = list(layers)
    if not layers:
        raise ValidationError("no layers supplied")
    mean_term = 0.0
    var_term = 0.0
    for layer in layers:
        mu, var, rm, rv = _layer_arrays(layer)
        dm = float(np.linalg.norm(mu - rm))
        dv = float(np.linalg.norm(var - rv))
        if squared:
            dm, dv = dm * dm, dv * dv
        mean_term += dm
        var_term += dv
    return mean_term + lambda_var * var_term


def load_layer_stats(path) -> list[LayerStat]:
    obj = json.loads(Path(path).read_text())
    try:
        return [
            LayerStat(
                name=str(entry.get("name", f"layer_{i}")),
                mean=np.asarray(entry["mean"], dtype=np.float64),
                var=np.asarray(entry["var"], dtype=np.float64),
                running_mean=np.asarray(entry["running_mean"], dtype=np.float64),
                running_var=np.asarray(entry["running_var"], dtype=np.float64),
            )
            for i, entry in enumerate(obj["layers"])
        ]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: bad layer-stats JSON ({exc})") from exc


@dataclass
class FeatureBatch:
    side: str  # "real" or "synthetic"
    tag: str  # pairing key, e.g. "v0/crop"
    embeddings: np.ndarray  # [n, d]


def _batch_means(batches, side: str) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for b in batches:
        emb = np.asarray(b.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] == 0:
            raise ValidationError(f"{side} batch {b.tag!r}: empty or non-2D embeddings")
        if not np.all(np.isfinite(emb)):
            raise ValidationError(f"{side} batch {b.tag!r}: non-finite embeddings")
        if b.tag in out:
            raise ValidationError(f"{side} side repeats tag {b.tag!r}")
        out[b.tag] = emb.mean(axis=0)
    return out


def dm_loss(real_batches, syn_batches) -> float:
    """Mean over tags of ||mean(real) - mean(synthetic)||^2."""
    real = _batch_means(list(real_batches), "real")
    syn = _batch_means(list(syn_batches), "synthetic")
    if not real:
        raise ValidationError("no real batches supplied")
    if set(real) != set(syn):
        raise ValidationError(
            f"tag misalignment: real {sorted(real)} vs synthetic {sorted(syn)}"
        )
    total = 0.0
    for tag in real:
        if real[tag].shape != syn[tag].shape:
            raise ValidationError(f"tag {tag!r}: embedding dims differ")
        diff = real[tag] - syn[tag]
        total += float(diff @ diff)
    return total / len(real)


def load_feature_batches(path) -> tuple[list[FeatureBatch], list[FeatureBatch]]:
    obj = json.loads(Path(path).read_text())
    real, syn = [], []
    try:
        for entry in obj["batches"]:
            batch = FeatureBatch(
                side=entry["side"],
                tag=str(entry["tag"]),
                embeddings=np.asarray(entry["embeddings"], dtype=np.float64),
            )
            if batch.side == "real":
                real.append(batch)
            elif batch.side == "synthetic":
                syn.append(batch)
            else:
                raise DataError(f"{path}: unknown side {batch.side!r}")
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: bad feature-batch JSON ({exc})") from exc
    return real, syn


@dataclass
class GradVector:
    side: str
    layers: list[np.ndarray]


def dc_loss(real_grads: GradVector, syn_grads: GradVector) -> float:
    """Sum over layers of (1 - cosine similarity) between gradient pairs."""
    if len(real_grads.layers) != len(syn_grads.layers):
        raise ValidationError(
            f"{len(real_grads.layers)} real layers vs {len(syn_grads.layers)} synthetic"
        )
    if not real_grads.layers:
        raise ValidationError("no gradient layers supplied")
    total = 0.0
    for i, (gr, gs) in enumerate(zip(real_grads.layers, syn_grads.layers)):
        gr = np.asarray(gr, dtype=np.float64).ravel()
        gs = np.asarray(gs, dtype=np.float64).ravel()
        if gr.size != gs.size:
            raise ValidationError(f"layer {i}: gradient dims differ")
        nr, ns = float(np.linalg.norm(gr)), float(np.linalg.norm(gs))
        if nr == 0.0 or ns == 0.0:
            raise NumericalError(f"layer {i}: zero-norm gradient")
        total += 1.0 - float(gr @ gs) / (nr * ns)
    return total


def load_grad_pair(path) -> tuple[GradVector, GradVector]:
    obj = json.loads(Path(path).read_text())
    try:
        real = [np.asarray(e["real"], dtype=np.float64) for e in obj["layers"]]
        syn = [np.asarray(e["synthetic"], dtype=np.float64) for e in obj["layers"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: bad gradient JSON ({exc})") from exc
    return GradVector("real", real), GradVector("synthetic", syn)
