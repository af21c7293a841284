"""On-disk per-sample prediction trajectories: format, loader, synthesis.

A trajectory directory holds one softmax probability vector per
(epoch, sample) plus labels and optional teacher/LR side channels:

    manifest.json   UTF-8 JSON with keys exactly: format_version, E, N, C,
                    endianness, dtype, has_teacher, files, checksums
    probs.bin       float32 little-endian, row-major [epoch][sample][class]
    labels.bin      uint32 little-endian, one class index per sample
    teacher.bin     float32 LE, [sample][class] (present iff has_teacher)
    lr.bin          float32 LE, one learning rate per epoch (optional)
    ids.txt         one sample id per line, LF-terminated

``files`` and ``checksums`` are keyed by logical name
("probs", "labels", "teacher", "lr", "ids"); checksums are 64-bit FNV-1a
over the raw file bytes, 16 lowercase hex digits. The row-major
[epoch][sample][class] layout lets epoch slices be taken without copying,
which the sliding-window scores rely on.

Probability rows must sum to 1 within ``ROW_SUM_TOL`` (1e-4, loose enough
for float32 softmax exports) and lie in [0, 1]. Tensors are immutable
after load and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumMismatchError,
    DataError,
    ManifestError,
    MissingFileError,
    NormalizationError,
    ShapeMismatchError,
    ValidationError,
)
from .fileio import atomic_write_bytes, atomic_write_text, fnv1a64, write_json

FORMAT_VERSION = 1
ENDIANNESS = "little"
DTYPE = "float32"
ROW_SUM_TOL = 1e-4

MANIFEST_KEYS = (
    "format_version",
    "E",
    "N",
    "C",
    "endianness",
    "dtype",
    "has_teacher",
    "files",
    "checksums",
)

_REQUIRED_LOGICAL = ("probs", "labels", "ids")
_OPTIONAL_LOGICAL = ("teacher", "lr")

SCENARIOS = ("constant", "late-learner", "random-walk", "sl-clustered")


@dataclass
class TrajectoryManifest:
    format_version: int
    E: int
    N: int
    C: int
    endianness: str
    dtype: str
    has_teacher: bool
    files: dict[str, str]
    checksums: dict[str, str]

    def to_json(self) -> str:
        obj = {
            "format_version": self.format_version,
            "E": self.E,
            "N": self.N,
            "C": self.C,
            "endianness": self.endianness,
            "dtype": self.dtype,
            "has_teacher": self.has_teacher,
            "files": self.files,
            "checksums": self.checksums,
        }
        return json.dumps(obj, indent=2) + "\n"


@dataclass
class TrajectoryTensor:
    """Validated in-memory trajectory. Arrays are read-only after load."""

    E: int
    N: int
    C: int
    probs: np.ndarray  # float32 [E, N, C]
    labels: np.ndarray  # uint32 [N]
    sample_ids: list[str]
    teacher_probs: np.ndarray | None = None  # float32 [N, C]
    lr_schedule: np.ndarray | None = None  # float32 [E]
    manifest_checksum: str = ""
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {sid: i for i, sid in enumerate(self.sample_ids)}

    def index_of(self, sample_id: str) -> int:
        return self._index[sample_id]

    def class_of(self, sample_id: str) -> int:
        return int(self.labels[self._index[sample_id]])

    def target_prob_series(self) -> np.ndarray:
        """Probability of each sample's own class per epoch, float64 [E, N]."""
        idx = np.arange(self.N)
        return self.probs[:, idx, self.labels.astype(np.intp)].astype(np.float64)

    def freeze(self) -> "TrajectoryTensor":
        self.probs.setflags(write=False)
        self.labels.setflags(write=False)
        if self.teacher_probs is not None:
            self.teacher_probs.setflags(write=False)
        if self.lr_schedule is not None:
            self.lr_schedule.setflags(write=False)
        return self


def _validate_rows(rows: np.ndarray, what: str) -> None:
    if np.any(rows < 0.0) or np.any(rows > 1.0):
        raise NormalizationError(f"{what}: probabilities outside [0, 1]")
    sums = rows.astype(np.float64).sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise NormalizationError(
            f"{what}: row sums deviate from 1 by up to {worst:.3e} (tol {ROW_SUM_TOL})"
        )


def validate_tensor(t: TrajectoryTensor) -> TrajectoryTensor:
    if t.E < 1 or t.N < 1 or t.C < 1:
        raise ValidationError("E, N, C must all be positive")
    if t.probs.shape != (t.E, t.N, t.C):
        raise ShapeMismatchError(f"probs shape {t.probs.shape} != {(t.E, t.N, t.C)}")
    if t.labels.shape != (t.N,):
        raise ShapeMismatchError(f"labels shape {t.labels.shape} != ({t.N},)")
    if len(t.sample_ids) != t.N:
        raise ShapeMismatchError(f"{len(t.sample_ids)} ids for N={t.N}")
    if len(set(t.sample_ids)) != t.N:
        raise DataError("sample ids are not unique")
    if np.any(t.labels.astype(np.int64) >= t.C):
        raise DataError("label out of range: labels must be < C")
    _validate_rows(t.probs, "probs")
    if t.teacher_probs is not None:
        if t.teacher_probs.shape != (t.N, t.C):
            raise ShapeMismatchError(
                f"teacher shape {t.teacher_probs.shape} != {(t.N, t.C)}"
            )
        _validate_rows(t.teacher_probs, "teacher")
    if t.lr_schedule is not None:
        if t.lr_schedule.shape != (t.E,):
            raise ShapeMismatchError(f"lr shape {t.lr_schedule.shape} != ({t.E},)")
        if np.any(t.lr_schedule < 0):
            raise DataError("learning rates must be non-negative")
    return t.freeze()


def _read_manifest(dir_path: Path) -> tuple[TrajectoryManifest, str]:
    mpath = dir_path / "manifest.json"
    if not mpath.is_file():
        raise ManifestError(f"no manifest.json in {dir_path}")
    raw = mpath.read_bytes()
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"manifest.json unparsable: {exc}") from exc
    if not isinstance(obj, dict) or set(obj) != set(MANIFEST_KEYS):
        raise ManifestError(
            f"manifest keys must be exactly {sorted(MANIFEST_KEYS)}, got {sorted(obj)}"
        )
    if obj["format_version"] != FORMAT_VERSION:
        raise ManifestError(f"unsupported format_version {obj['format_version']!r}")
    if obj["endianness"] != ENDIANNESS:
        raise ManifestError(f"endianness must be {ENDIANNESS!r}")
    if obj["dtype"] != DTYPE:
        raise ManifestError(f"dtype must be {DTYPE!r}")
    for k in ("E", "N", "C"):
        if not isinstance(obj[k], int) or obj[k] < 1:
            raise ManifestError(f"{k} must be a positive integer")
    files = obj["files"]
    checks = obj["checksums"]
    if not isinstance(files, dict) or not isinstance(checks, dict):
        raise ManifestError("files and checksums must be objects")
    known = set(_REQUIRED_LOGICAL) | set(_OPTIONAL_LOGICAL)
    if not set(_REQUIRED_LOGICAL) <= set(files) or not set(files) <= known:
        raise ManifestError(
            f"files must include {_REQUIRED_LOGICAL} and only names from {sorted(known)}"
        )
    if set(files) != set(checks):
        raise ManifestError("checksums must cover exactly the listed files")
    if bool(obj["has_teacher"]) != ("teacher" in files):
        raise ManifestError("has_teacher flag inconsistent with files")
    man = TrajectoryManifest(
        format_version=obj["format_version"],
        E=obj["E"],
        N=obj["N"],
        C=obj["C"],
        endianness=obj["endianness"],
        dtype=obj["dtype"],
        has_teacher=bool(obj["has_teacher"]),
        files=dict(files),
        checksums=dict(checks),
    )
    return man, fnv1a64(raw)


def _read_checked(dir_path: Path, man: TrajectoryManifest, name: str) -> bytes:
    fpath = dir_path / man.files[name]
    if not fpath.is_file():
        raise MissingFileError(f"missing {name} file {fpath}")
    data = fpath.read_bytes()
    digest = fnv1a64(data)
    if digest != man.checksums[name]:
        raise ChecksumMismatchError(
            f"{name}: checksum {digest} != manifest {man.checksums[name]}"
        )
    return data


def load_trajectory(dir_path) -> TrajectoryTensor:
    """Load and fully validate a trajectory directory.

    Raises ManifestError, MissingFileError, ChecksumMismatchError,
    ShapeMismatchError, or NormalizationError depending on what is wrong.
    """
    dir_path = Path(dir_path)
    man, man_digest = _read_manifest(dir_path)
    E, N, C = man.E, man.N, man.C

    raw = _read_checked(dir_path, man, "probs")
    if len(raw) != E * N * C * 4:
        raise ShapeMismatchError(
            f"probs.bin is {len(raw)} bytes, expected {E * N * C * 4}"
        )
    probs = np.frombuffer(raw, dtype="<f4").reshape(E, N, C).copy()

    raw = _read_checked(dir_path, man, "labels")
    if len(raw) != N * 4:
        raise ShapeMismatchError(f"labels.bin is {len(raw)} bytes, expected {N * 4}")
    labels = np.frombuffer(raw, dtype="<u4").copy()

    raw = _read_checked(dir_path, man, "ids")
    text = raw.decode("utf-8")
    if text and not text.endswith("\n"):
        raise DataError("ids.txt must be LF-terminated")
    ids = text.split("\n")[:-1]
    if len(ids) != N:
        raise ShapeMismatchError(f"ids.txt has {len(ids)} lines, expected {N}")

    teacher = None
    if "teacher" in man.files:
        raw = _read_checked(dir_path, man, "teacher")
        if len(raw) != N * C * 4:
            raise ShapeMismatchError(
                f"teacher.bin is {len(raw)} bytes, expected {N * C * 4}"
            )
        teacher = np.frombuffer(raw, dtype="<f4").reshape(N, C).copy()

    lr = None
    if "lr" in man.files:
        raw = _read_checked(dir_path, man, "lr")
        if len(raw) != E * 4:
            raise ShapeMismatchError(f"lr.bin is {len(raw)} bytes, expected {E * 4}")
        lr = np.frombuffer(raw, dtype="<f4").copy()

    t = TrajectoryTensor(
        E=E,
        N=N,
        C=C,
        probs=probs,
        labels=labels,
        sample_ids=ids,
        teacher_probs=teacher,
        lr_schedule=lr,
        manifest_checksum=man_digest,
    )
    return validate_tensor(t)


def write_trajectory(
    dir_path,
    probs: np.ndarray,
    labels: np.ndarray,
    sample_ids: list[str],
    teacher_probs: np.ndarray | None = None,
    lr_schedule: np.ndarray | None = None,
) -> Path:
    """Validate arrays and emit a complete trajectory directory."""
    dir_path = Path(dir_path)
    probs = np.ascontiguousarray(probs, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u4")
    teacher = (
        np.ascontiguousarray(teacher_probs, dtype="<f4")
        if teacher_probs is not None
        else None
    )
    lr = (
        np.ascontiguousarray(lr_schedule, dtype="<f4")
        if lr_schedule is not None
        else None
    )
    E, N, C = probs.shape
    validate_tensor(
        TrajectoryTensor(
            E=E, N=N, C=C, probs=probs, labels=labels, sample_ids=list(sample_ids),
            teacher_probs=teacher, lr_schedule=lr,
        )
    )

    dir_path.mkdir(parents=True, exist_ok=True)
    payload: dict[str, bytes] = {
        "probs": probs.tobytes(),
        "labels": labels.tobytes(),
        "ids": ("\n".join(sample_ids) + "\n").encode("utf-8"),
    }
    files = {"probs": "probs.bin", "labels": "labels.bin", "ids": "ids.txt"}
    if teacher is not None:
        payload["teacher"] = teacher.tobytes()
        files["teacher"] = "teacher.bin"
    if lr is not None:
        payload["lr"] = lr.tobytes()
        files["lr"] = "lr.bin"

    for name, data in payload.items():
        atomic_write_bytes(dir_path / files[name], data)

    man = TrajectoryManifest(
        format_version=FORMAT_VERSION,
        E=E,
        N=N,
        C=C,
        endianness=ENDIANNESS,
        dtype=DTYPE,
        has_teacher=teacher is not None,
        files=files,
        checksums={name: fnv1a64(data) for name, data in payload.items()},
    )
    atomic_write_text(dir_path / "manifest.json", man.to_json())
    return dir_path


# ---------------------------------------------------------------------------
# Synthetic trajectories for desk-scale testing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    E: int
    N: int
    C: int
    seed: int
    scenario: str


def sample_id(n: int) -> str:
    return f"sample_{n:06d}"


def _group_of(n: int, C: int) -> str:
    """Sample group in the late-learner scenario.

    Samples are arranged in blocks of C (one per class) so every group is
    exactly class-balanced: blocks 0, 10, 20, ... are late learners (10%),
    blocks 1-3 mod 10 oscillate early (30%), the rest stay constant.
    """
    b = (n // C) % 10
    if b == 0:
        return "late"
    if b in (1, 2, 3):
        return "oscillator"
    return "constant"


def late_learner_ids(N: int, C: int) -> list[str]:
    return [sample_id(n) for n in range(N) if _group_of(n, C) == "late"]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _constant_rows(rng: np.random.Generator, N: int, C: int, labels) -> np.ndarray:
    logits = rng.normal(0.0, 1.0, size=(N, C))
    logits[np.arange(N), labels] += 1.2
    return _softmax(logits)


def _spread_off_mass(t: np.ndarray, u: np.ndarray, label: int, C: int) -> np.ndarray:
    """Rows [E, C] with target-class series t and fixed off-class mixture u."""
    E = t.shape[0]
    rows = np.empty((E, C))
    off = np.delete(np.arange(C), label)
    rows[:, label] = t
    rows[:, off] = (1.0 - t)[:, None] * u[None, :]
    return rows


def _late_learner_probs(rng, E, N, C, labels):
    probs = np.empty((E, N, C))
    const_rows = _constant_rows(rng, N, C, labels)
    epochs = np.arange(E, dtype=np.float64)
    # Ramp must finish before the last epoch and start early enough that a
    # two-thirds-compute run (K = 2E/3, J = 6, W = 2) still sees it move.
    s1_late = max(1, E - 2)
    s0_cap = max(0, min(s1_late - 1, (2 * E) // 3 - 3))
    for n in range(N):
        group = _group_of(n, C)
        if group == "constant" or C == 1:
            probs[:, n, :] = const_rows[n]
            continue
        u = rng.dirichlet(np.ones(C - 1)) if C > 2 else np.ones(1)
        if group == "late":
            lo = rng.uniform(0.06, 0.14)
            hi = rng.uniform(0.86, 0.92)
            s0 = int(np.clip(int(0.54 * E) + rng.integers(-1, 2), 0, s0_cap))
            s1 = s1_late
            t = lo + (hi - lo) * np.clip((epochs - s0) / max(s1 - s0, 1), 0.0, 1.0)
        else:  # oscillator: contested in the first third, then settled
            lo = rng.uniform(0.05, 0.20)
            hi = rng.uniform(0.80, 0.95)
            m = max(2, E // 3)
            phase = int(rng.integers(0, 2))
            t = np.full(E, hi)
            osc = np.arange(E) < m
            odd = (np.arange(E) + phase) % 2 == 1
            t[osc & odd] = lo
        probs[:, n, :] = _spread_off_mass(t, u, int(labels[n]), C)
    return probs


def _random_walk_probs(rng, E, N, C, labels):
    logits = rng.normal(0.0, 1.0, size=(N, C))
    logits[np.arange(N), labels] += 1.0
    probs = np.empty((E, N, C))
    probs[0] = _softmax(logits)
    for e in range(1, E):
        logits = logits + rng.normal(0.0, 0.25, size=(N, C))
        probs[e] = _softmax(logits)
    return probs


def _sl_clustered(rng, E, N, C, labels):
    """Teacher rows plus per-epoch perturbations with near-constant ||p - q||."""
    teacher = np.full((N, C), 0.5 / C)
    teacher[np.arange(N), labels] += 0.5
    probs = np.empty((E, N, C))
    if C == 1:
        probs[:] = 1.0
        return probs, teacher
    d0 = 0.04
    for n in range(N):
        q = teacher[n]
        for e in range(E):
            g = rng.normal(size=C)
            v = g - g.mean()
            nv = np.linalg.norm(v)
            if nv < 1e-9:
                v = np.zeros(C)
                v[0], v[-1] = 1.0, -1.0
                nv = np.sqrt(2.0)
            v = v / nv
            d = d0 * (1.0 + 0.02 * rng.normal())
            neg = v < 0
            if np.any(neg):
                d = min(d, float(np.min((q[neg] - 1e-3) / -v[neg])))
            probs[e, n] = q + max(d, 0.0) * v
    return probs, teacher


def write_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Generate a deterministic synthetic trajectory directory.

    Pure function of (spec, seed): two invocations produce byte-identical
    files. Scenarios:

    constant      per-sample probabilities identical across epochs
    late-learner  10% of samples ramp their target-class probability up
                  late in training (epoch 0 < 0.2, final epoch > 0.8);
                  30% oscillate early then settle; the rest are constant
    random-walk   logits follow a seeded Gaussian random walk
    sl-clustered  teacher soft labels present, per-sample ||p - q|| tightly
                  clustered across the dataset
    """
    if spec.E < 1 or spec.N < 1 or spec.C < 1:
        raise ValidationError("E, N, C must all be positive")
    if spec.scenario not in SCENARIOS:
        raise ValidationError(f"scenario must be one of {SCENARIOS}")
    rng = np.random.default_rng(spec.seed)
    E, N, C = spec.E, spec.N, spec.C
    labels = np.arange(N, dtype=np.uint32) % C
    teacher = None

    if spec.scenario == "constant":
        rows = _constant_rows(rng, N, C, labels) if C > 1 else np.ones((N, 1))
        probs = np.broadcast_to(rows, (E, N, C)).copy()
    elif spec.scenario == "late-learner":
        probs = _late_learner_probs(rng, E, N, C, labels)
    elif spec.scenario == "random-walk":
        probs = (
            _random_walk_probs(rng, E, N, C, labels) if C > 1 else np.ones((E, N, 1))
        )
    else:
        probs, teacher = _sl_clustered(rng, E, N, C, labels)

    lr = 0.1 * 0.5 * (1.0 + np.cos(np.pi * np.arange(E) / max(E - 1, 1)))
    ids = [sample_id(n) for n in range(N)]
    out_dir = Path(out_dir)
    write_trajectory(out_dir, probs, labels, ids, teacher_probs=teacher, lr_schedule=lr)

    meta: dict = {"scenario": spec.scenario, "seed": spec.seed}
    if spec.scenario == "late-learner":
        groups: dict[str, list[str]] = {"late": [], "oscillator": [], "constant": []}
        for n in range(N):
            groups[_group_of(n, C)].append(ids[n])
        meta["groups"] = groups
    write_json(out_dir / "scenario.json", meta)
    return out_dir
