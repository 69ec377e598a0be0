import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evmlime.dataset import Dataset
from evmlime.errors import DimensionMismatch, TooFewSamples
from evmlime.sampling import (
    SmoteConfig,
    balance,
    euclidean_distance,
    nearest_neighbors,
    neighbor_table,
    smote,
    smote_matrix,
)


def test_euclidean_distance():
    assert euclidean_distance((0, 0), (3, 4)) == 5.0
    assert euclidean_distance((2, 7), (2, 7)) == 0.0
    assert euclidean_distance((1, 1, 1), (2, 3, 4)) == pytest.approx(math.sqrt(14), abs=1e-15)
    with pytest.raises(DimensionMismatch):
        euclidean_distance((1,), (1, 2))


def _brute_neighbors(X, i, k):
    d = sorted((euclidean_distance(X[i], X[j]), j) for j in range(len(X)) if j != i)
    return [j for _, j in d[:k]]


def test_nearest_neighbors_examples():
    X = np.array([[0.0], [1.0], [10.0]])
    assert nearest_neighbors(X, 0, 1).tolist() == [1]
    assert sorted(nearest_neighbors(X, 0, 2).tolist()) == [1, 2]
    dup = np.array([[5.0], [1.0], [5.0]])
    assert nearest_neighbors(dup, 0, 1).tolist() == [2]
    with pytest.raises(TooFewSamples):
        nearest_neighbors(X, 0, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.integers(1, 4), st.integers(0, 1000))
def test_neighbor_table_matches_brute_force(n, d, seed):
    X = np.random.default_rng(seed).integers(0, 4, (n, d)).astype(float)
    k = min(3, n - 1)
    table = neighbor_table(X, k)
    for i in range(n):
        assert table[i].tolist() == _brute_neighbors(X, i, k)
        assert nearest_neighbors(X, i, k).tolist() == table[i].tolist()


def test_interpolation_examples():
    x, y = np.array([0.0, 0.0]), np.array([2.0, 4.0])
    assert np.array_equal(x + 0.5 * (y - x), [1.0, 2.0])
    # duplicate neighbour: every synthetic row equals the parent
    X = np.array([[3.0, 1.0], [3.0, 1.0]])
    syn, parent, _ = smote_matrix(X, SmoteConfig(k_neighbors=1, sampling_rate=5, seed=1))
    assert np.array_equal(syn, X[parent])


def _minority(n=12, d=4, seed=0):
    X = np.random.default_rng(seed).poisson(5, (n, d)).astype(float)
    return Dataset(tuple(f"m{i}" for i in range(n)), X, np.ones(n, dtype=int), tuple("ABCD"[:d]))


def test_output_sizes():
    m = _minority()
    assert len(smote(m, SmoteConfig(k_neighbors=3, sampling_rate=4))) == 48
    assert len(smote(m, SmoteConfig(k_neighbors=3, target_count=50))) == 38
    syn = smote(m, SmoteConfig(k_neighbors=3, target_count=50))
    assert set(syn.y.tolist()) == {1}


def test_config_validation():
    with pytest.raises(ValueError):
        SmoteConfig(k_neighbors=3)
    with pytest.raises(ValueError):
        SmoteConfig(k_neighbors=3, sampling_rate=2, target_count=10)
    with pytest.raises(TooFewSamples):
        smote(_minority(n=3), SmoteConfig(k_neighbors=3, sampling_rate=1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_segment_and_determinism(seed):
    m = _minority(seed=seed % 7)
    cfg = SmoteConfig(k_neighbors=5, sampling_rate=3, seed=seed)
    syn, parent, partner = smote_matrix(m.X, cfg)
    lo = np.minimum(m.X[parent], m.X[partner])
    hi = np.maximum(m.X[parent], m.X[partner])
    assert ((syn >= lo) & (syn <= hi)).all()
    assert (syn >= 0).all()
    assert np.array_equal(syn, smote_matrix(m.X, cfg)[0])
    nbrs = neighbor_table(m.X, 5)
    assert all(p in nbrs[i] for i, p in zip(parent, partner))


def test_balance_equalizes_classes():
    rng = np.random.default_rng(2)
    X = rng.poisson(4, (60, 3)).astype(float)
    y = np.array([0] * 50 + [1] * 10)
    ds = Dataset(tuple(map(str, range(60))), X, y, ("A", "B", "C"))
    out = balance(ds, k_neighbors=5, seed=4)
    assert out.class_counts() == {0: 50, 1: 50}
    assert np.array_equal(out.X[:60], X)
