"""Distillation correlation scoring: does a loss objective track generalization?

The headline quantity is the Spearman rank correlation between per-subset
generalization errors and distillation losses. An optional adjustment
removes the confounding effect of subset size by rank-residualizing both
variables on ranked size before correlating (a nonparametric partial
correlation). Generalization errors live in a reusable CSV lookup table so
each subset's training run is paid for once.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ConflictError, UndefinedCorrelationError, ValidationError
from .fileio import fmt9, read_csv, round9, write_csv

MIN_RECORDS = 3
_RESIDUAL_EPS = 1e-12


@dataclass
class DCSRecord:
    subset_id: str
    gen_error: float
    distill_loss: float
    subset_size: int


@dataclass
class DCSRecordSet:
    records: list[DCSRecord]
    objective: str = ""

    def validate(self) -> "DCSRecordSet":
        ids = [r.subset_id for r in self.records]
        if len(ids) != len(set(ids)):
            raise ValidationError("subset ids are not unique")
        if len(ids) < MIN_RECORDS:
            raise ValidationError(f"need >= {MIN_RECORDS} records, got {len(ids)}")
        for r in self.records:
            if not 0.0 <= r.gen_error <= 1.0:
                raise ValidationError(f"{r.subset_id}: gen_error outside [0, 1]")
            if r.subset_size < 1:
                raise ValidationError(f"{r.subset_id}: subset_size must be positive")
            if not np.isfinite(r.distill_loss):
                raise ValidationError(f"{r.subset_id}: non-finite loss")
        return self


@dataclass
class DCSReport:
    rho_raw: float
    rho_adjusted: float | None
    n: int
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "rho_raw": round9(self.rho_raw),
            "rho_adjusted": None if self.rho_adjusted is None else round9(self.rho_adjusted),
            "n": self.n,
            "notes": self.notes,
        }


def _midranks(a: np.ndarray) -> np.ndarray:
    return stats.rankdata(a, method="average")


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    den = float(np.sqrt((xc @ xc) * (yc @ yc)))
    if den == 0.0:
        raise UndefinedCorrelationError("constant input: correlation undefined")
    return float((xc @ yc) / den)


def spearman(x, y) -> float:
    """Pearson correlation of average (midrank) tie-adjusted ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-D arrays of equal length")
    if x.size < MIN_RECORDS:
        raise ValidationError(f"need n >= {MIN_RECORDS}, got {x.size}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("constant input: rank correlation undefined")
    return _pearson(_midranks(x), _midranks(y))


def dcs(records: DCSRecordSet, adjust_size: bool = False) -> DCSReport:
    """Rank correlation of generalization error vs distillation loss.

    With ``adjust_size``, errors and losses are each residualized (OLS with
    intercept) on ranked subset size first; when size already explains all
    rank variance of one side, the adjusted correlation is reported as 0
    with an explanatory note, and when all sizes are equal the adjustment
    is skipped.
    """
    records.validate()
    err = np.array([r.gen_error for r in records.records], dtype=np.float64)
    loss = np.array([r.distill_loss for r in records.records], dtype=np.float64)
    size = np.array([r.subset_size for r in records.records], dtype=np.float64)
    rho_raw = spearman(err, loss)
    if not adjust_size:
        return DCSReport(rho_raw, None, len(records.records))

    if np.all(size == size[0]):
        return DCSReport(
            rho_raw, None, len(records.records),
            notes="all subset sizes equal; size adjustment skipped",
        )
    r_err, r_loss, r_size = _midranks(err), _midranks(loss), _midranks(size)
    design = np.column_stack([np.ones_like(r_size), r_size])
    res_err = r_err - design @ np.linalg.lstsq(design, r_err, rcond=None)[0]
    res_loss = r_loss - design @ np.linalg.lstsq(design, r_loss, rcond=None)[0]
    n = len(records.records)
    notes = ""
    if np.linalg.norm(res_err) < _RESIDUAL_EPS * n or np.linalg.norm(res_loss) < _RESIDUAL_EPS * n:
        return DCSReport(
            rho_raw, 0.0, n,
            notes="size explains all rank variance of one variable; adjusted rho set to 0",
        )
    return DCSReport(rho_raw, _pearson(res_err, res_loss), n, notes)


# ---------------------------------------------------------------------------
# Generalization-error lookup table
# ---------------------------------------------------------------------------

ERROR_TABLE_HEADER = ["subset_id", "gen_error", "subset_size"]


def read_error_table(store_path) -> dict[str, tuple[float, int]]:
    store_path = Path(store_path)
    if not store_path.is_file():
        return {}
    header, rows = read_csv(store_path)
    if header != ERROR_TABLE_HEADER:
        raise ValidationError(f"{store_path}: expected header {','.join(ERROR_TABLE_HEADER)}")
    return {sid: (float(err), int(size)) for sid, err, size in rows}


def _write_error_table(store_path, table: dict[str, tuple[float, int]]) -> Path:
    rows = [[sid, fmt9(err), str(size)] for sid, (err, size) in sorted(table.items())]
    return write_csv(store_path, ERROR_TABLE_HEADER, rows)


def error_table_upsert(store_path, subset_id: str, gen_error: float, subset_size: int) -> Path:
    """Idempotent upsert keyed by subset id; whole-file replace on write.

    Re-recording the same subset with a different size is a conflict, since
    the size is part of the subset's identity in the correlation analysis.
    """
    if not 0.0 <= gen_error <= 1.0:
        raise ValidationError("gen_error must lie in [0, 1]")
    if subset_size < 1:
        raise ValidationError("subset_size must be positive")
    store_path = Path(store_path)
    table = read_error_table(store_path)
    if subset_id in table and table[subset_id][1] != subset_size:
        raise ConflictError(
            f"{subset_id}: stored size {table[subset_id][1]} != {subset_size}"
        )
    table[subset_id] = (float(gen_error), int(subset_size))
    return _write_error_table(store_path, table)
