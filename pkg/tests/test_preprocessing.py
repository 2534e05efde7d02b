import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from theftgru.attacks import HONEST, MALICIOUS, LabeledSet, Provenance
from theftgru.preprocessing import (AdasynError, AlreadyScaled, Scaler, adasyn_oversample,
                                    apply_scaler, fit_scaler, split_train_test)


def make_rows(n_honest, n_mal, T=48, seed=0, cid="c"):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n_honest, T)), rng.normal(1.5, 1, (n_mal, T))])
    labels = [HONEST] * n_honest + [MALICIOUS] * n_mal
    prov = [Provenance.REAL] * n_honest + [Provenance.F1] * n_mal
    return LabeledSet(X, labels, prov, [cid] * len(labels))


def on_segment(p, a, b, tol=1e-9):
    d = b - a
    denom = d @ d
    if denom == 0:
        return np.allclose(p, a, atol=tol)
    lam = (p - a) @ d / denom
    return -tol <= lam <= 1 + tol and np.linalg.norm(a + lam * d - p) <= tol


def test_adasyn_full_scale_counts():
    rows = make_rows(536, 3216)
    out = adasyn_oversample(rows, 5, np.random.default_rng(1))
    assert len(out) == 6432
    assert (out.labels == HONEST).sum() == (out.labels == MALICIOUS).sum() == 3216
    assert (out.provenance == Provenance.ADASYN).sum() == 3216 - 536
    np.testing.assert_array_equal(out.features[:len(rows)], rows.features)
    out.check()


def test_adasyn_balanced_unchanged():
    rows = make_rows(10, 10)
    assert adasyn_oversample(rows, 3, np.random.default_rng(0)) is rows


def test_adasyn_toy_segments_brute_force():
    rng = np.random.default_rng(4)
    minority = rng.uniform(0, 1, (3, 2))
    majority = rng.uniform(0, 1, (9, 2))
    rows = LabeledSet(np.vstack([minority, majority]), [HONEST] * 3 + [MALICIOUS] * 9,
                      [Provenance.REAL] * 3 + [Provenance.F2] * 9, ["c"] * 12)
    out = adasyn_oversample(rows, 2, np.random.default_rng(0))
    synth = out.features[12:]
    assert len(synth) == 6
    for p in synth:
        assert any(on_segment(p, minority[i], minority[j])
                   for i in range(3) for j in range(3) if i != j)


def test_adasyn_segments_within_k_minority_neighbours():
    rng = np.random.default_rng(8)
    minority = rng.uniform(0, 1, (8, 2))
    majority = rng.uniform(0, 1, (30, 2))
    k = 3
    rows = LabeledSet(np.vstack([minority, majority]), [HONEST] * 8 + [MALICIOUS] * 30,
                      [Provenance.REAL] * 8 + [Provenance.F2] * 30, ["c"] * 38)
    out = adasyn_oversample(rows, k, np.random.default_rng(2))
    d = ((minority[:, None] - minority[None]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    neigh = np.argsort(d, axis=1, kind="stable")[:, :k]
    for p in out.features[38:]:
        assert any(on_segment(p, minority[i], minority[j]) for i in range(8) for j in neigh[i])


def test_adasyn_errors():
    with pytest.raises(AdasynError):
        adasyn_oversample(make_rows(5, 0), 2, np.random.default_rng(0))
    with pytest.raises(AdasynError, match="smaller k"):
        adasyn_oversample(make_rows(3, 20), 5, np.random.default_rng(0))
    with pytest.raises(AdasynError):
        adasyn_oversample(make_rows(20, 5), 2, np.random.default_rng(0))


def test_adasyn_deterministic():
    rows = make_rows(20, 70, T=6)
    a = adasyn_oversample(rows, 5, np.random.default_rng(3))
    b = adasyn_oversample(rows, 5, np.random.default_rng(3))
    assert a.features.tobytes() == b.features.tobytes()


@given(st.integers(6, 30), st.integers(0, 60), st.integers(1, 5), st.integers(0, 2**32))
def test_adasyn_properties(n_min, extra, k, seed):
    rows = make_rows(n_min, n_min + extra, T=4, seed=seed)
    out = adasyn_oversample(rows, k, np.random.default_rng(seed))
    n_h, n_m = (out.labels == HONEST).sum(), (out.labels == MALICIOUS).sum()
    assert n_m == n_min + extra
    assert abs(n_h - n_m) <= k
    assert len(out) >= len(rows)
    assert (out.labels[len(rows):] == HONEST).all()
    out.check()


def test_split_counts():
    s = split_train_test({"a": make_rows(3216, 3216, T=2)}, np.random.default_rng(0))
    assert (len(s.train), len(s.test)) == (3859, 2573)
    s = split_train_test({"a": make_rows(2, 3, T=2)}, np.random.default_rng(0))
    assert (len(s.train), len(s.test)) == (3, 2)


def test_split_additive_over_customers():
    per = {"a": make_rows(5, 7, T=2, cid="a"), "b": make_rows(9, 4, T=2, cid="b")}
    s = split_train_test(per, np.random.default_rng(0))
    assert len(s.train) == 12 * 3 // 5 + 13 * 3 // 5


def test_split_small_customer_warns(caplog):
    with caplog.at_level(logging.WARNING):
        s = split_train_test({"a": make_rows(2, 2, T=2)}, np.random.default_rng(0))
    assert len(s.train) == 4 and len(s.test) == 0
    assert "only 4 rows" in caplog.text


@given(st.integers(1, 40), st.integers(0, 2**32))
def test_split_is_partition(n, seed):
    rows = LabeledSet(np.arange(n, dtype=float)[:, None] * [1, 1], [0] * n, [0] * n, ["a"] * n)
    s = split_train_test({"a": rows}, np.random.default_rng(seed))
    got = sorted(s.train.features[:, 0].tolist() + s.test.features[:, 0].tolist())
    assert got == list(range(n))


def test_scaler_examples():
    s = fit_scaler(np.array([[1.0], [2.0], [3.0]]))
    assert s.means[0] == 2.0
    assert s.stds[0] == pytest.approx(np.sqrt(2 / 3))
    s = fit_scaler(np.array([[4.0], [4.0], [4.0]]))
    assert (s.means[0], s.stds[0]) == (4.0, 1.0)
    s = fit_scaler(np.array([[0.0, 2.0], [2.0, 2.0]]))
    np.testing.assert_array_equal(s.means, [1, 2])
    np.testing.assert_array_equal(s.stds, [1, 1])
    out = apply_scaler(Scaler(np.array([2.0]), np.array([0.8165])), np.array([[1.0]]))
    assert out[0, 0] == pytest.approx(-1.2247, abs=1e-4)


def test_scaler_errors():
    with pytest.raises(ValueError):
        fit_scaler(np.empty((0, 3)))
    with pytest.raises(ValueError):
        apply_scaler(fit_scaler(np.eye(3)), np.ones((2, 4)))


def test_scaler_train_moments():
    rows = make_rows(200, 300, seed=2)
    rows.features[:, 7] = 3.0
    scaled = apply_scaler(fit_scaler(rows), rows).features
    assert np.abs(scaled.mean(axis=0)).max() < 1e-9
    stds = np.delete(scaled.std(axis=0), 7)
    assert np.abs(stds - 1).max() < 1e-6


def test_scaler_json_round_trip_and_double_apply():
    rows = make_rows(5, 5, T=3)
    s = fit_scaler(rows)
    back = Scaler.from_json(s.to_json())
    assert back.means.tobytes() == s.means.tobytes() and back.stds.tobytes() == s.stds.tobytes()
    once = apply_scaler(back, rows)
    with pytest.raises(AlreadyScaled):
        apply_scaler(back, once)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30))
def test_scaling_preserves_order(col):
    X = np.array(col)[:, None]
    out = apply_scaler(fit_scaler(X), X)[:, 0]
    order = np.argsort(X[:, 0], kind="stable")
    assert (np.diff(out[order]) >= 0).all()
