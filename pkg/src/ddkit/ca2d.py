"""Patch-stitched distilled image assembly over a difficulty-selected coreset.

The pipeline scores samples with the compute-aware difficulty metric,
selects the top window per class, crops random-resized patch candidates
from each selected image, scores patches (built-in sharpness heuristic,
a score file, or an external command), keeps each image's best patch, and
stitches the per-class top patches into f x f grids at a fixed output
resolution. Everything is deterministic in (inputs, seed) and output PNGs
are written atomically, so byte-identity across reruns is testable.
"""

from __future__ import annotations

import io
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError, ScorerError, ValidationError
from .fileio import atomic_write_bytes, fnv1a64_int, read_csv, round9, write_json
from .scores import ScoreParams, cad_prune
from .selection import SubsetSpec, select_window
from .trajstore import TrajectoryTensor

MIN_PATCH_SIDE = 8
DEFAULT_NUM_CANDIDATES = 16
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class CropParams:
    scale: tuple[float, float] = (0.08, 1.0)
    aspect: tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)

    def validate(self) -> "CropParams":
        lo, hi = self.scale
        if not (0.0 < lo <= hi <= 1.0):
            raise ValidationError("scale range must satisfy 0 < lo <= hi <= 1")
        alo, ahi = self.aspect
        if not (0.0 < alo <= ahi):
            raise ValidationError("aspect range must be positive and ordered")
        return self


@dataclass
class PatchCandidate:
    sample_id: str
    patch_index: int
    x: int
    y: int
    w: int
    h: int
    seed_lineage: int
    score: float | None = None

    def rect(self) -> tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h


@dataclass
class PatchScorer:
    """Pluggable patch scoring: sharpness heuristic, score file, or command."""

    kind: str  # "sharpness_heuristic" | "file_scores" | "external_command"
    table: dict[tuple[str, int], float] = field(default_factory=dict)
    command: list[str] = field(default_factory=list)

    @classmethod
    def sharpness(cls) -> "PatchScorer":
        return cls("sharpness_heuristic")

    @classmethod
    def from_file(cls, path) -> "PatchScorer":
        header, rows = read_csv(Path(path))
        if header != ["sample_id", "patch_index", "score"]:
            raise ValidationError(f"{path}: expected header sample_id,patch_index,score")
        table = {(sid, int(idx)): float(s) for sid, idx, s in rows}
        return cls("file_scores", table=table)

    @classmethod
    def external(cls, command: list[str]) -> "PatchScorer":
        if not command:
            raise ValidationError("external scorer command is empty")
        return cls("external_command", command=list(command))


@dataclass
class DistilledImage:
    class_index: int
    filename: str
    patches: list[PatchCandidate]  # f*f entries, row-major grid order


@dataclass
class DistilledImageSet:
    factor: int
    resolution: int
    ipc: int
    images: list[DistilledImage]

    def provenance(self) -> dict:
        return {
            "factor": self.factor,
            "resolution": self.resolution,
            "ipc": self.ipc,
            "images": [
                {
                    "class": im.class_index,
                    "filename": im.filename,
                    "patches": [
                        {
                            "sample_id": p.sample_id,
                            "patch_index": p.patch_index,
                            "rect": [p.x, p.y, p.w, p.h],
                            "score": None if p.score is None else round9(p.score),
                        }
                        for p in im.patches
                    ],
                }
                for im in self.images
            ],
        }


def load_image(path) -> np.ndarray:
    """Decode an image file to an RGB uint8 array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise DataError(f"unreadable image {path}: {exc}") from exc


def _candidate_rng(sample_id: str, seed: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed & 0xFFFFFFFF, fnv1a64_int(sample_id.encode())])
    )


def generate_candidates(
    image: np.ndarray,
    sample_id: str,
    num_candidates: int,
    crop: CropParams = CropParams(),
    seed: int = 0,
) -> list[PatchCandidate]:
    """Random-resized-crop rectangles, deterministic in (sample id, seed).

    Area fractions are drawn uniformly from the scale range and aspect
    ratios log-uniformly from the aspect range; rectangles are clipped to
    image bounds and never smaller than 8 x 8.
    """
    crop.validate()
    if num_candidates < 1:
        raise ValidationError("num_candidates must be >= 1")
    H, W = image.shape[:2]
    if H < MIN_PATCH_SIDE or W < MIN_PATCH_SIDE:
        raise ValidationError(f"image {W}x{H} smaller than {MIN_PATCH_SIDE} px minimum")
    rng = _candidate_rng(sample_id, seed)
    area = float(H * W)
    out: list[PatchCandidate] = []
    for i in range(num_candidates):
        w = h = 0
        for _ in range(10):
            frac = rng.uniform(crop.scale[0], crop.scale[1])
            log_ar = rng.uniform(np.log(crop.aspect[0]), np.log(crop.aspect[1]))
            ar = float(np.exp(log_ar))
            cw = int(round(np.sqrt(frac * area * ar)))
            ch = int(round(np.sqrt(frac * area / ar)))
            if MIN_PATCH_SIDE <= cw <= W and MIN_PATCH_SIDE <= ch <= H:
                w, h = cw, ch
                break
        if w == 0:
            # fallback: central square at the midpoint of the scale range
            mid = 0.5 * (crop.scale[0] + crop.scale[1])
            side = int(round(np.sqrt(mid * area)))
            w = h = int(np.clip(side, MIN_PATCH_SIDE, min(W, H)))
        x = int(rng.integers(0, W - w + 1))
        y = int(rng.integers(0, H - h + 1))
        out.append(PatchCandidate(sample_id, i, x, y, w, h, seed))
    return out


def _to_gray(patch: np.ndarray) -> np.ndarray:
    p = patch.astype(np.float64)
    if p.ndim == 2:
        return p
    return 0.299 * p[..., 0] + 0.587 * p[..., 1] + 0.114 * p[..., 2]


def sharpness_score(patch: np.ndarray) -> float:
    """Variance of the 3x3 Laplacian of the grayscale patch.

    Exactly zero on constant patches; translation-invariant on periodic
    patterns (the Laplacian response just shifts with the pattern).
    """
    g = _to_gray(patch)
    if g.shape[0] < 3 or g.shape[1] < 3:
        raise ValidationError("patch too small for a 3x3 Laplacian")
    lap = (
        g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4.0 * g[1:-1, 1:-1]
    )
    return float(np.var(lap))


def _crop(image: np.ndarray, cand: PatchCandidate) -> np.ndarray:
    return image[cand.y : cand.y + cand.h, cand.x : cand.x + cand.w]


def score_patches(
    candidates: list[PatchCandidate],
    scorer: PatchScorer,
    images: dict[str, np.ndarray] | None = None,
) -> list[PatchCandidate]:
    """Attach a finite score to every candidate; order is preserved."""
    if scorer.kind == "sharpness_heuristic":
        if images is None:
            raise ValidationError("sharpness scoring needs the source images")
        scored = []
        for c in candidates:
            if c.sample_id not in images:
                raise DataError(f"no pixels supplied for {c.sample_id}")
            scored.append(replace(c, score=sharpness_score(_crop(images[c.sample_id], c))))
        return scored
    if scorer.kind == "file_scores":
        scored = []
        for c in candidates:
            key = (c.sample_id, c.patch_index)
            if key not in scorer.table:
                raise ScorerError(f"score file missing entry for {key}")
            scored.append(replace(c, score=float(scorer.table[key])))
        return scored
    if scorer.kind == "external_command":
        lines = [
            f"{c.sample_id},{c.patch_index},{c.x},{c.y},{c.w},{c.h}" for c in candidates
        ]
        try:
            proc = subprocess.run(
                scorer.command,
                input="\n".join(lines) + "\n",
                capture_output=True,
                text=True,
                check=True,
            )
        except (OSError, subprocess.CalledProcessError) as exc:
            raise ScorerError(f"external scorer failed: {exc}") from exc
        vals = proc.stdout.split()
        if len(vals) != len(candidates):
            raise ScorerError(
                f"external scorer returned {len(vals)} scores for {len(candidates)} candidates"
            )
        scored = []
        for c, v in zip(candidates, vals):
            try:
                s = float(v)
            except ValueError as exc:
                raise ScorerError(f"unparsable score {v!r}") from exc
            if not np.isfinite(s):
                raise ScorerError(f"non-finite score for {(c.sample_id, c.patch_index)}")
            scored.append(replace(c, score=s))
        return scored
    raise ValidationError(f"unknown scorer kind {scorer.kind!r}")


def _candidate_order_key(c: PatchCandidate):
    # descending score, ties resolved by the (sample_id, patch_index) total order
    return (-c.score, c.sample_id, c.patch_index)


def output_filename(class_index: int, group: int) -> str:
    return f"class_{class_index}_ipc_{group}.png"


def assemble(
    subset: SubsetSpec,
    scored_candidates: list[PatchCandidate],
    f: int,
    resolution: int,
    ipc: int,
    images: dict[str, np.ndarray],
) -> tuple[DistilledImageSet, dict[str, Image.Image]]:
    """Stitch per-class top patches into f x f grids of side ``resolution``.

    Each image contributes its single best patch; per class the top
    ipc * f^2 patches (by score, descending) are packed row-major into
    groups of f^2, the g-th group holding ranks [g*f^2, (g+1)*f^2). Cells
    are resized with bilinear resampling to (resolution/f) squared.
    """
    if f < 1 or ipc < 1:
        raise ValidationError("f and ipc must be positive")
    if resolution % f != 0:
        raise ValidationError(f"resolution {resolution} not divisible by factor {f}")
    cell = resolution // f
    members = set(subset.sample_ids)
    by_image: dict[str, PatchCandidate] = {}
    for c in scored_candidates:
        if c.score is None:
            raise ValidationError(f"candidate {(c.sample_id, c.patch_index)} unscored")
        if c.sample_id not in members:
            continue
        cur = by_image.get(c.sample_id)
        if cur is None or _candidate_order_key(c) < _candidate_order_key(cur):
            by_image[c.sample_id] = c

    class_of = dict(zip(subset.sample_ids, subset.classes))
    per_class: dict[int, list[PatchCandidate]] = {}
    for sid in subset.sample_ids:
        if sid not in by_image:
            raise ValidationError(f"no scored candidate for subset member {sid}")
        per_class.setdefault(class_of[sid], []).append(by_image[sid])

    need = ipc * f * f
    out_images: list[DistilledImage] = []
    rendered: dict[str, Image.Image] = {}
    for cls in sorted(per_class):
        ranked = sorted(per_class[cls], key=_candidate_order_key)
        if len(ranked) < need:
            raise ValidationError(
                f"class {cls}: {len(ranked)} images < ipc*f^2 = {need}"
            )
        top = ranked[:need]
        for g in range(ipc):
            group = top[g * f * f : (g + 1) * f * f]
            canvas = Image.new("RGB", (resolution, resolution))
            for idx, cand in enumerate(group):
                patch = _crop(images[cand.sample_id], cand)
                tile = Image.fromarray(patch).resize((cell, cell), Image.BILINEAR)
                canvas.paste(tile, ((idx % f) * cell, (idx // f) * cell))
            name = output_filename(cls, g)
            out_images.append(DistilledImage(cls, name, group))
            rendered[name] = canvas
    dset = DistilledImageSet(f, resolution, ipc, out_images)
    return dset, rendered


def write_distilled(
    dset: DistilledImageSet,
    rendered: dict[str, Image.Image],
    out_dir,
    extra_provenance: dict | None = None,
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for im in dset.images:
        buf = io.BytesIO()
        rendered[im.filename].save(buf, format="PNG")
        atomic_write_bytes(out_dir / im.filename, buf.getvalue())
    prov = dset.provenance()
    prov.update(extra_provenance or {})
    write_json(out_dir / "provenance.json", prov)
    return out_dir


def resolve_image_paths(image_dir, sample_ids) -> dict[str, Path]:
    """Map sample ids to image files by filename stem; aggregate misses."""
    image_dir = Path(image_dir)
    found: dict[str, Path] = {}
    missing: list[str] = []
    for sid in sample_ids:
        for suffix in IMAGE_SUFFIXES:
            p = image_dir / f"{sid}{suffix}"
            if p.is_file():
                found[sid] = p
                break
        else:
            missing.append(sid)
    if missing:
        raise DataError(
            f"{len(missing)} sample ids have no image in {image_dir}: {missing}"
        )
    return found


def _class_workload(args):
    """Candidate generation + scoring for one class (parallelizable unit)."""
    ids, paths, num_candidates, crop, seed, scorer = args
    images = {sid: load_image(paths[sid]) for sid in ids}
    cands: list[PatchCandidate] = []
    for sid in ids:
        cands.extend(generate_candidates(images[sid], sid, num_candidates, crop, seed))
    return score_patches(cands, scorer, images), images


def ca2d_pipeline(
    traj: TrajectoryTensor,
    image_dir,
    cad_params: ScoreParams,
    ipc: int,
    f: int,
    resolution: int,
    scorer: PatchScorer | None = None,
    seed: int = 0,
    out_dir=None,
    num_candidates: int = DEFAULT_NUM_CANDIDATES,
    crop: CropParams = CropParams(),
    start_quantile: float = 0.0,
    jobs: int = 1,
) -> DistilledImageSet:
    """Difficulty-scored selection followed by patch crop/select/stitch.

    Selection takes the descending-score window at ``start_quantile`` (top
    difficulty first by default) with per-class size ipc * f^2; the
    quantile is exposed for ablation.
    """
    scorer = scorer or PatchScorer.sharpness()
    table = cad_prune(traj, cad_params)
    subset = select_window(table, traj, ipc * f * f, start_quantile, "descending")
    paths = resolve_image_paths(image_dir, subset.sample_ids)

    class_of = dict(zip(subset.sample_ids, subset.classes))
    classes = sorted(set(subset.classes))
    work = []
    for cls in classes:
        ids = [sid for sid in subset.sample_ids if class_of[sid] == cls]
        work.append((ids, paths, num_candidates, crop, seed, scorer))

    if jobs > 1 and scorer.kind != "external_command":
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_class_workload, work))
    else:
        results = [_class_workload(w) for w in work]

    scored: list[PatchCandidate] = []
    images: dict[str, np.ndarray] = {}
    for cands, imgs in results:
        scored.extend(cands)
        images.update(imgs)

    dset, rendered = assemble(subset, scored, f, resolution, ipc, images)
    if out_dir is not None:
        write_distilled(
            dset, rendered, out_dir,
            extra_provenance={"selection": subset.provenance, "seed": seed},
        )
    return dset
