import math

import numpy as np
import pytest

from ddkit.dcs import DCSRecord, DCSRecordSet, dcs, error_table_upsert, read_error_table, spearman
from ddkit.errors import ConflictError, UndefinedCorrelationError, ValidationError


# --- brute-force oracle (pure python) -------------------------------------------

def oracle_midranks(a):
    out = []
    for v in a:
        less = sum(1 for x in a if x < v)
        ties = sum(1 for x in a if x == v)
        out.append(less + (ties + 1) / 2.0)
    return out


def oracle_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = math.sqrt(
        sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)
    )
    return num / den


def oracle_spearman(x, y):
    return oracle_pearson(oracle_midranks(list(x)), oracle_midranks(list(y)))


# --- spearman ---------------------------------------------------------------------

def test_spearman_monotone():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)


def test_spearman_antimonotone():
    assert spearman([1, 2, 3], [30, 20, 10]) == pytest.approx(-1.0)


def test_spearman_with_ties_matches_oracle():
    x, y = [1, 2, 2, 3], [1, 3, 2, 4]
    assert oracle_midranks(x) == [1, 2.5, 2.5, 4]
    assert spearman(x, y) == pytest.approx(oracle_spearman(x, y), abs=1e-12)


def test_spearman_constant_input():
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 2, 3], [5, 5, 5])


def test_spearman_too_short():
    with pytest.raises(ValidationError):
        spearman([1, 2], [2, 1])


def test_spearman_oracle_random_ties():
    rng = np.random.default_rng(12)
    for _ in range(300):
        n = int(rng.integers(3, 21))
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.integers(0, 6, size=n).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        assert spearman(x, y) == pytest.approx(oracle_spearman(x, y), abs=1e-12)


def test_spearman_monotone_transform_invariance():
    rng = np.random.default_rng(3)
    transforms = [
        lambda v: v**3 + 2 * v,
        lambda v: np.exp(v),
        lambda v: 5 * v + 1,
        lambda v: np.arctan(v),
    ]
    for _ in range(50):
        n = int(rng.integers(3, 15))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        base = spearman(x, y)
        fx = transforms[int(rng.integers(len(transforms)))]
        gy = transforms[int(rng.integers(len(transforms)))]
        assert spearman(fx(x), gy(y)) == pytest.approx(base, abs=1e-12)


# --- dcs ---------------------------------------------------------------------------

def records(errors, losses, sizes):
    return DCSRecordSet(
        [
            DCSRecord(f"s{i}", float(e), float(l), int(s))
            for i, (e, l, s) in enumerate(zip(errors, losses, sizes))
        ]
    )


def test_dcs_raw_monotone():
    rep = dcs(records([0.1, 0.2, 0.3], [1, 2, 3], [10, 10, 10]))
    assert rep.rho_raw == pytest.approx(1.0)
    assert rep.rho_adjusted is None
    assert rep.n == 3


def test_dcs_equal_sizes_skip_adjustment():
    rep = dcs(records([0.1, 0.2, 0.3], [1, 2, 3], [10, 10, 10]), adjust_size=True)
    assert rep.rho_adjusted is None
    assert "skipped" in rep.notes


def test_dcs_confound_adjustment():
    """Loss equals size; error tracks size but has no direct link to loss."""
    rng = np.random.default_rng(8)
    n = 40
    sizes = np.arange(1, n + 1) * 10
    losses = sizes.astype(float)
    errors = np.clip(0.2 + 0.6 * (sizes / sizes.max()) + rng.normal(0, 0.02, n), 0, 1)
    rep = dcs(records(errors, losses, sizes), adjust_size=True)
    assert abs(rep.rho_raw) > 0.8
    assert rep.rho_adjusted is not None
    assert abs(rep.rho_adjusted) < 0.1


def test_dcs_duplicated_records_leave_raw_unchanged():
    errors = [0.1, 0.5, 0.3, 0.9]
    losses = [2.0, 1.0, 4.0, 3.0]
    sizes = [10, 20, 30, 40]
    base = dcs(records(errors, losses, sizes)).rho_raw
    doubled = dcs(records(errors * 2, losses * 2, sizes * 2)).rho_raw
    assert doubled == pytest.approx(base, abs=1e-12)
    assert doubled == pytest.approx(oracle_spearman(errors * 2, losses * 2), abs=1e-12)


def test_dcs_permutation_invariance():
    rng = np.random.default_rng(0)
    errors = rng.uniform(0, 1, 12)
    losses = rng.normal(size=12)
    sizes = rng.integers(1, 100, 12)
    base = dcs(records(errors, losses, sizes), adjust_size=True)
    perm = rng.permutation(12)
    shuffled = dcs(records(errors[perm], losses[perm], sizes[perm]), adjust_size=True)
    assert shuffled.rho_raw == pytest.approx(base.rho_raw, abs=1e-12)
    assert shuffled.rho_adjusted == pytest.approx(base.rho_adjusted, abs=1e-9)


def test_dcs_validation():
    with pytest.raises(ValidationError):
        dcs(records([0.1, 0.2], [1, 2], [1, 1]))
    with pytest.raises(ValidationError):
        dcs(records([0.1, 0.2, 1.4], [1, 2, 3], [1, 1, 1]))
    bad = DCSRecordSet(
        [DCSRecord("dup", 0.1, 1.0, 1), DCSRecord("dup", 0.2, 2.0, 1), DCSRecord("x", 0.3, 3.0, 1)]
    )
    with pytest.raises(ValidationError):
        dcs(bad)


# --- error table ---------------------------------------------------------------------

def test_error_table_insert_then_read(tmp_path):
    store = tmp_path / "errors.csv"
    error_table_upsert(store, "subset_a", 0.25, 100)
    table = read_error_table(store)
    assert table == {"subset_a": (0.25, 100)}


def test_error_table_idempotent_upsert(tmp_path):
    store = tmp_path / "errors.csv"
    error_table_upsert(store, "subset_a", 0.25, 100)
    error_table_upsert(store, "subset_a", 0.25, 100)
    header = store.read_text().splitlines()
    assert header == ["subset_id,gen_error,subset_size", "subset_a,0.25,100"]


def test_error_table_updates_error_same_size(tmp_path):
    store = tmp_path / "errors.csv"
    error_table_upsert(store, "subset_a", 0.25, 100)
    error_table_upsert(store, "subset_a", 0.30, 100)
    assert read_error_table(store)["subset_a"] == (0.30, 100)


def test_error_table_size_conflict(tmp_path):
    store = tmp_path / "errors.csv"
    error_table_upsert(store, "subset_a", 0.25, 100)
    with pytest.raises(ConflictError):
        error_table_upsert(store, "subset_a", 0.25, 200)


def test_error_table_validates_inputs(tmp_path):
    store = tmp_path / "errors.csv"
    with pytest.raises(ValidationError):
        error_table_upsert(store, "a", 1.5, 10)
    with pytest.raises(ValidationError):
        error_table_upsert(store, "a", 0.5, 0)


def test_degenerate_loss_equals_size_exactly():
    """Residualizing loss ranks on size ranks leaves nothing; adjusted rho is 0."""
    rng = np.random.default_rng(4)
    n = 30
    sizes = np.arange(1, n + 1)
    losses = sizes.astype(float)
    errors = np.clip(sizes / (n + 1.0) + rng.normal(0, 0.01, n), 0, 1)
    rep = dcs(records(errors, losses, sizes), adjust_size=True)
    assert abs(rep.rho_raw) > 0.8
    assert rep.rho_adjusted == 0.0
    assert "size explains" in rep.notes
