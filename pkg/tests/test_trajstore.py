import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddkit import trajstore
from ddkit.errors import (
    ChecksumMismatchError,
    DataError,
    ManifestError,
    MissingFileError,
    NormalizationError,
    ShapeMismatchError,
    ValidationError,
)
from ddkit.fileio import fnv1a64

from conftest import make_store


def test_fnv1a64_known_vectors():
    assert fnv1a64(b"") == "cbf29ce484222325"
    assert fnv1a64(b"a") == "af63dc4c8601ec8c"
    assert fnv1a64(b"foobar") == "85944171f73967e8"


def test_smallest_valid_store(tiny_store):
    t = trajstore.load_trajectory(tiny_store)
    assert (t.E, t.N, t.C) == (1, 1, 2)
    assert t.probs.tolist() == [[[0.5, 0.5]]]
    assert t.labels.tolist() == [0]
    assert t.sample_ids == ["sample_000000"]
    assert t.class_of("sample_000000") == 0
    assert t.teacher_probs is None


def test_probs_file_one_byte_short(tiny_store):
    p = tiny_store / "probs.bin"
    data = p.read_bytes()[:-1]
    p.write_bytes(data)
    man = json.loads((tiny_store / "manifest.json").read_text())
    man["checksums"]["probs"] = fnv1a64(data)
    (tiny_store / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(ShapeMismatchError):
        trajstore.load_trajectory(tiny_store)


def test_checksum_mismatch(tiny_store):
    p = tiny_store / "probs.bin"
    raw = bytearray(p.read_bytes())
    raw[0] ^= 0xFF
    p.write_bytes(bytes(raw))
    with pytest.raises(ChecksumMismatchError):
        trajstore.load_trajectory(tiny_store)


def test_missing_file(tiny_store):
    (tiny_store / "labels.bin").unlink()
    with pytest.raises(MissingFileError):
        trajstore.load_trajectory(tiny_store)


def test_row_normalization_rejected(tmp_path):
    with pytest.raises(NormalizationError):
        trajstore.write_trajectory(
            tmp_path / "bad",
            probs=np.array([[[0.6, 0.6]]], dtype=np.float32),
            labels=np.array([0], dtype=np.uint32),
            sample_ids=["a"],
        )


def test_normalization_checked_at_load(tiny_store):
    bad = np.array([[[0.7, 0.7]]], dtype="<f4").tobytes()
    (tiny_store / "probs.bin").write_bytes(bad)
    man = json.loads((tiny_store / "manifest.json").read_text())
    man["checksums"]["probs"] = fnv1a64(bad)
    (tiny_store / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(NormalizationError):
        trajstore.load_trajectory(tiny_store)


def test_probability_range_rejected(tiny_store):
    bad = np.array([[[1.5, -0.5]]], dtype="<f4").tobytes()
    (tiny_store / "probs.bin").write_bytes(bad)
    man = json.loads((tiny_store / "manifest.json").read_text())
    man["checksums"]["probs"] = fnv1a64(bad)
    (tiny_store / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(NormalizationError):
        trajstore.load_trajectory(tiny_store)


def test_manifest_key_set_enforced(tiny_store):
    man = json.loads((tiny_store / "manifest.json").read_text())
    man["extra"] = 1
    (tiny_store / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(ManifestError):
        trajstore.load_trajectory(tiny_store)
    del man["extra"]
    del man["dtype"]
    (tiny_store / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(ManifestError):
        trajstore.load_trajectory(tiny_store)


def test_label_out_of_range_rejected(tiny_store):
    bad = np.array([2], dtype="<u4").tobytes()
    (tiny_store / "labels.bin").write_bytes(bad)
    man = json.loads((tiny_store / "manifest.json").read_text())
    man["checksums"]["labels"] = fnv1a64(bad)
    (tiny_store / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(DataError):
        trajstore.load_trajectory(tiny_store)


def test_round_trip_bit_exact(tmp_path):
    spec = trajstore.SyntheticSpec(E=4, N=6, C=3, seed=11, scenario="random-walk")
    out = trajstore.write_synthetic(spec, tmp_path / "rw")
    t = trajstore.load_trajectory(out)
    assert t.probs.astype("<f4").tobytes() == (out / "probs.bin").read_bytes()
    assert t.labels.astype("<u4").tobytes() == (out / "labels.bin").read_bytes()


def test_synthetic_determinism(tmp_path):
    spec = trajstore.SyntheticSpec(E=3, N=4, C=2, seed=42, scenario="sl-clustered")
    d1 = trajstore.write_synthetic(spec, tmp_path / "a")
    d2 = trajstore.write_synthetic(spec, tmp_path / "b")
    for name in ("manifest.json", "probs.bin", "labels.bin", "teacher.bin", "lr.bin", "ids.txt"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name


def test_constant_scenario(tmp_path):
    t = make_store(tmp_path, E=2, N=2, C=2, seed=7, scenario="constant")
    assert np.array_equal(t.probs[0], t.probs[1])


def test_late_learner_endpoints(tmp_path):
    t = make_store(tmp_path, E=30, N=40, C=2, seed=3, scenario="late-learner")
    late = set(trajstore.late_learner_ids(40, 2))
    assert late
    tp = t.target_prob_series()
    for sid in late:
        n = t.index_of(sid)
        assert tp[0, n] < 0.2
        assert tp[-1, n] > 0.8


def test_late_learner_groups_are_class_balanced(tmp_path):
    t = make_store(tmp_path, E=30, N=1000, C=2, seed=1, scenario="late-learner")
    meta = json.loads((tmp_path / "store" / "scenario.json").read_text())
    late = meta["groups"]["late"]
    assert len(late) == 100
    classes = [t.class_of(sid) for sid in late]
    assert classes.count(0) == classes.count(1) == 50


def test_sl_clustered_scores_tightly_clustered(tmp_path):
    t = make_store(tmp_path, E=6, N=60, C=5, seed=9, scenario="sl-clustered")
    assert t.teacher_probs is not None
    d = np.linalg.norm(
        t.probs.astype(np.float64) - t.teacher_probs.astype(np.float64)[None],
        axis=2,
    ).mean(axis=0)
    assert d.std() / d.mean() < 0.15


def test_unknown_scenario_rejected(tmp_path):
    spec = trajstore.SyntheticSpec(E=1, N=1, C=1, seed=0, scenario="nope")
    with pytest.raises(ValidationError):
        trajstore.write_synthetic(spec, tmp_path / "x")


def test_lr_schedule_round_trip(tmp_path):
    t = make_store(tmp_path, E=5, N=2, C=2, seed=0, scenario="constant")
    assert t.lr_schedule is not None
    assert t.lr_schedule.shape == (5,)
    assert np.all(t.lr_schedule >= 0)
    assert t.lr_schedule[0] == pytest.approx(0.1, abs=1e-6)


def test_duplicate_ids_rejected(tmp_path):
    with pytest.raises(DataError):
        trajstore.write_trajectory(
            tmp_path / "dup",
            probs=np.full((1, 2, 2), 0.5, dtype=np.float32),
            labels=np.zeros(2, dtype=np.uint32),
            sample_ids=["same", "same"],
        )


def test_tensor_is_immutable(tmp_path):
    t = make_store(tmp_path, E=2, N=2, C=2)
    with pytest.raises(ValueError):
        t.probs[0, 0, 0] = 0.9


@settings(max_examples=20, deadline=None)
@given(
    E=st.integers(1, 6),
    N=st.integers(1, 8),
    C=st.integers(1, 5),
    seed=st.integers(0, 2**31),
    scenario=st.sampled_from(trajstore.SCENARIOS),
)
def test_any_synthetic_store_round_trips(tmp_path_factory, E, N, C, seed, scenario):
    tmp = tmp_path_factory.mktemp("prop")
    spec = trajstore.SyntheticSpec(E=E, N=N, C=C, seed=seed, scenario=scenario)
    out = trajstore.write_synthetic(spec, tmp / "s")
    t = trajstore.load_trajectory(out)
    assert (t.E, t.N, t.C) == (E, N, C)
    sums = t.probs.astype(np.float64).sum(axis=2)
    assert np.all(np.abs(sums - 1.0) <= trajstore.ROW_SUM_TOL)
    assert np.all(t.labels.astype(int) < C)
    assert len(set(t.sample_ids)) == N
