import numpy as np
import pytest
from PIL import Image

from ddkit import trajstore


def make_store(tmp_path, E, N, C, seed=0, scenario="constant", name="store"):
    spec = trajstore.SyntheticSpec(E=E, N=N, C=C, seed=seed, scenario=scenario)
    out = tmp_path / name
    trajstore.write_synthetic(spec, out)
    return trajstore.load_trajectory(out)


@pytest.fixture
def tiny_store(tmp_path):
    """Hand-built smallest valid store: E=1, N=1, C=2, probs [0.5, 0.5]."""
    out = tmp_path / "tiny"
    trajstore.write_trajectory(
        out,
        probs=np.array([[[0.5, 0.5]]], dtype=np.float32),
        labels=np.array([0], dtype=np.uint32),
        sample_ids=["sample_000000"],
    )
    return out


def store_from_probs(tmp_path, probs, labels=None, teacher=None, name="built"):
    """Directory for an explicit [E, N, C] float array."""
    probs = np.asarray(probs, dtype=np.float32)
    E, N, C = probs.shape
    if labels is None:
        labels = np.arange(N, dtype=np.uint32) % C
    out = tmp_path / name
    trajstore.write_trajectory(
        out,
        probs=probs,
        labels=np.asarray(labels, dtype=np.uint32),
        sample_ids=[trajstore.sample_id(n) for n in range(N)],
        teacher_probs=teacher,
    )
    return trajstore.load_trajectory(out)


def traj_from_target_series(tmp_path, series, name="series"):
    """Two-class trajectory whose target-class probability follows ``series``.

    ``series`` is [N, E] (or [E] for one sample); labels are all class 0, so
    probs[e, n] = [t, 1 - t].
    """
    t = np.atleast_2d(np.asarray(series, dtype=np.float64))
    N, E = t.shape
    probs = np.empty((E, N, 2), dtype=np.float64)
    probs[:, :, 0] = t.T
    probs[:, :, 1] = 1.0 - t.T
    return store_from_probs(
        tmp_path, probs, labels=np.zeros(N, dtype=np.uint32), name=name
    )


def checker(h, w, period=4, phase=0, lo=0, hi=255):
    yy, xx = np.mgrid[0:h, 0:w]
    cells = ((yy + phase) // period + (xx + phase) // period) % 2
    return np.where(cells == 0, lo, hi).astype(np.uint8)


def build_image_set(dir_path, traj, size=48, seed=0):
    """One deterministic RGB PNG per sample id, with varying texture."""
    dir_path.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for n, sid in enumerate(traj.sample_ids):
        cls = int(traj.labels[n])
        if cls % 2 == 0:
            g = np.linspace(0, 255, size, dtype=np.float64)
            base = np.tile(g, (size, 1))
            img = np.stack([base, base * 0.5, 255 - base], axis=-1)
        else:
            period = int(rng.integers(3, 7))
            phase = int(rng.integers(0, period))
            base = checker(size, size, period, phase).astype(np.float64)
            img = np.stack([base, 255 - base, base], axis=-1)
        img += rng.normal(0, 8, img.shape)
        arr = np.clip(img, 0, 255).astype(np.uint8)
        Image.fromarray(arr, "RGB").save(dir_path / f"{sid}.png")
    return dir_path
