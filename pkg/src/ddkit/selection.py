"""Class-balanced subset construction and Pareto analysis over score tables.

Every selector returns a SubsetSpec with exactly ``ipc`` samples per class.
Score ties are broken by sample id (lexicographic ascending) so selections
are reproducible across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fileio import fmt9, read_csv, write_csv, write_json
from .scores import ScoreTable
from .trajstore import TrajectoryTensor


@dataclass
class SubsetSpec:
    """An ordered, class-balanced selection of sample ids with provenance."""

    sample_ids: list[str]
    classes: list[int]
    ipc: int
    provenance: dict = field(default_factory=dict)

    @property
    def class_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for c in self.classes:
            hist[c] = hist.get(c, 0) + 1
        return hist

    def validate(self, num_classes: int | None = None) -> "SubsetSpec":
        if len(self.sample_ids) != len(set(self.sample_ids)):
            raise ValidationError("subset contains duplicate sample ids")
        hist = self.class_histogram
        if any(v != self.ipc for v in hist.values()):
            raise ValidationError(f"class histogram {hist} is not balanced at ipc={self.ipc}")
        if num_classes is not None and len(hist) != num_classes:
            raise ValidationError(f"subset covers {len(hist)} of {num_classes} classes")
        return self

    def to_csv(self, path) -> Path:
        path = Path(path)
        rows = [[sid, str(c)] for sid, c in zip(self.sample_ids, self.classes)]
        write_csv(path, ["sample_id", "class"], rows)
        write_json(path.with_suffix(".json"), {"ipc": self.ipc, "provenance": self.provenance})
        return path

    @classmethod
    def from_csv(cls, path) -> "SubsetSpec":
        import json

        path = Path(path)
        header, rows = read_csv(path)
        if header != ["sample_id", "class"]:
            raise ValidationError(f"{path}: expected header sample_id,class")
        ids = [r[0] for r in rows]
        classes = [int(r[1]) for r in rows]
        ipc, prov = 0, {}
        sidecar = path.with_suffix(".json")
        if sidecar.is_file():
            obj = json.loads(sidecar.read_text())
            ipc = obj.get("ipc", 0)
            prov = obj.get("provenance", {})
        if not ipc:
            counts = {}
            for c in classes:
                counts[c] = counts.get(c, 0) + 1
            ipc = max(counts.values()) if counts else 0
        return cls(ids, classes, ipc, prov)


@dataclass
class ParetoPoint:
    ipc: int
    f: float
    accuracy: float
    is_frontier: bool = False


def _ids_by_class(traj: TrajectoryTensor) -> dict[int, list[str]]:
    by_class: dict[int, list[str]] = {c: [] for c in range(traj.C)}
    for sid, lab in zip(traj.sample_ids, traj.labels):
        by_class[int(lab)].append(sid)
    for ids in by_class.values():
        ids.sort()
    return by_class


def select_random(traj: TrajectoryTensor, ipc: int, seed: int) -> SubsetSpec:
    """Uniform per-class sample without replacement, deterministic in seed."""
    if ipc < 1:
        raise ValidationError("ipc must be positive")
    by_class = _ids_by_class(traj)
    rng = np.random.default_rng(seed)
    ids: list[str] = []
    classes: list[int] = []
    for c in range(traj.C):
        pool = by_class[c]
        if len(pool) < ipc:
            raise ValidationError(f"class {c} has {len(pool)} samples < ipc={ipc}")
        pick = rng.choice(len(pool), size=ipc, replace=False)
        ids.extend(pool[i] for i in pick)
        classes.extend([c] * ipc)
    spec = SubsetSpec(ids, classes, ipc, {"method": "random", "seed": seed})
    return spec.validate(traj.C)


def _sorted_class_ids(scores: ScoreTable, pool: list[str], order: str) -> list[str]:
    if order not in ("ascending", "descending"):
        raise ValidationError("order must be 'ascending' or 'descending'")
    missing = [sid for sid in pool if sid not in scores.scores]
    if missing:
        raise ValidationError(f"score table missing ids, e.g. {missing[:3]}")
    sign = 1.0 if order == "ascending" else -1.0
    return sorted(pool, key=lambda sid: (sign * scores.scores[sid], sid))


def window_start(start_quantile: float, class_size: int, ipc: int) -> int:
    """floor(q * (class_size - ipc)): every q in [0, 1] yields a valid window."""
    return int(math.floor(start_quantile * (class_size - ipc)))


def select_window(
    scores: ScoreTable,
    traj: TrajectoryTensor,
    ipc: int,
    start_quantile: float,
    order: str = "ascending",
) -> SubsetSpec:
    """Contiguous run of ipc samples per class out of the score-sorted order."""
    if not 0.0 <= start_quantile <= 1.0:
        raise ValidationError("start_quantile must lie in [0, 1]")
    if ipc < 1:
        raise ValidationError("ipc must be positive")
    by_class = _ids_by_class(traj)
    ids: list[str] = []
    classes: list[int] = []
    for c in range(traj.C):
        pool = _sorted_class_ids(scores, by_class[c], order)
        if len(pool) < ipc:
            raise ValidationError(f"class {c} has {len(pool)} samples < ipc={ipc}")
        start = window_start(start_quantile, len(pool), ipc)
        ids.extend(pool[start : start + ipc])
        classes.extend([c] * ipc)
    prov = {
        "method": "window",
        "score_method": scores.method,
        "score_checksum": scores.source_manifest_checksum,
        "start_quantile": start_quantile,
        "order": order,
    }
    return SubsetSpec(ids, classes, ipc, prov).validate(traj.C)


def sliding_window_enumerate(
    scores: ScoreTable,
    traj: TrajectoryTensor,
    ipc: int,
    stride: int,
    order: str = "ascending",
) -> list[SubsetSpec]:
    """All difficulty windows at per-class offsets 0, stride, 2*stride, ...

    Per class of size s, offsets run up to s - ipc, giving
    floor((s - ipc) / stride) + 1 windows; with unequal class sizes the
    enumeration stops at the smallest class count.
    """
    if stride < 1:
        raise ValidationError("stride must be positive")
    if ipc < 1:
        raise ValidationError("ipc must be positive")
    by_class = _ids_by_class(traj)
    sorted_pools: dict[int, list[str]] = {}
    counts = []
    for c in range(traj.C):
        pool = _sorted_class_ids(scores, by_class[c], order)
        if len(pool) < ipc:
            raise ValidationError(f"class {c} has {len(pool)} samples < ipc={ipc}")
        sorted_pools[c] = pool
        counts.append((len(pool) - ipc) // stride + 1)
    n_windows = min(counts)
    out = []
    for w in range(n_windows):
        ids: list[str] = []
        classes: list[int] = []
        for c in range(traj.C):
            start = w * stride
            ids.extend(sorted_pools[c][start : start + ipc])
            classes.extend([c] * ipc)
        prov = {
            "method": "sliding_window",
            "score_method": scores.method,
            "window_index": w,
            "offset": w * stride,
            "stride": stride,
            "order": order,
        }
        out.append(SubsetSpec(ids, classes, ipc, prov).validate(traj.C))
    return out


def pareto_frontier(points) -> list[ParetoPoint]:
    """Annotate per-ipc argmax-accuracy points; ties go to the smallest f."""
    pts = [ParetoPoint(int(ipc), float(f), float(acc)) for ipc, f, acc in points]
    if not pts:
        raise ValidationError("no points supplied")
    for p in pts:
        if not 0.0 <= p.accuracy <= 1.0:
            raise ValidationError(f"accuracy {p.accuracy} outside [0, 1]")
    best: dict[int, ParetoPoint] = {}
    for p in pts:
        cur = best.get(p.ipc)
        if cur is None or p.accuracy > cur.accuracy or (
            p.accuracy == cur.accuracy and p.f < cur.f
        ):
            best[p.ipc] = p
    for p in pts:
        p.is_frontier = best[p.ipc] is p
    return pts


def write_pareto_csv(points: list[ParetoPoint], path) -> Path:
    rows = [
        [str(p.ipc), fmt9(p.f), fmt9(p.accuracy), "true" if p.is_frontier else "false"]
        for p in points
    ]
    return write_csv(path, ["ipc", "f", "accuracy", "is_frontier"], rows)
