"""SMOTE oversampling of the malicious class in opcode-frequency space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evmlime.dataset import MALICIOUS, Dataset
from evmlime.errors import DimensionMismatch, TooFewSamples
from evmlime.seeding import child_rng


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    sampling_rate: int | None = None
    target_count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if (self.sampling_rate is None) == (self.target_count is None):
            raise ValueError("set exactly one of sampling_rate and target_count")
        if self.sampling_rate is not None and self.sampling_rate < 1:
            raise ValueError("sampling_rate must be a positive integer")


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def neighbor_table(X: np.ndarray, k: int) -> np.ndarray:
    """Row i holds the indices of the k nearest other rows of X.

    Equal distances resolve to the lower row index.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n <= k:
        raise TooFewSamples(f"need more than k={k} minority samples, got {n}")
    out = np.empty((n, k), dtype=np.int64)
    step = max(1, (1 << 22) // max(1, n * X.shape[1]))
    for start in range(0, n, step):
        block = X[start:start + step]
        d = ((block[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        rows = np.arange(len(block))
        d[rows, start + rows] = np.inf  # exclude self
        out[start:start + step] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def nearest_neighbors(X, i: int, k: int) -> np.ndarray:
    """Indices of the k members of X closest to X[i], excluding i itself."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) <= k:
        raise TooFewSamples(f"need more than k={k} samples, got {len(X)}")
    d = ((X - X[i]) ** 2).sum(axis=1)
    d[i] = np.inf
    return np.argsort(d, kind="stable")[:k]


def draws_per_sample(n_minority: int, cfg: SmoteConfig) -> np.ndarray:
    if cfg.sampling_rate is not None:
        return np.full(n_minority, cfg.sampling_rate, dtype=np.int64)
    needed = max(0, cfg.target_count - n_minority)
    base, extra = divmod(needed, n_minority)
    counts = np.full(n_minority, base, dtype=np.int64)
    counts[:extra] += 1
    return counts


def smote_matrix(X: np.ndarray, cfg: SmoteConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate synthetic rows from minority matrix X.

    Returns ``(synthetic, parent, neighbor)`` where each synthetic row is
    ``X[parent] + t * (X[neighbor] - X[parent])`` with ``t ~ U[0, 1]``.
    Every parent draws from its own stream derived from (seed, row index).
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise TooFewSamples("minority class is empty")
    counts = draws_per_sample(len(X), cfg)
    if counts.sum() == 0:
        empty = np.empty(0, dtype=np.int64)
        return np.empty((0, X.shape[1])), empty, empty
    neighbors = neighbor_table(X, cfg.k_neighbors)
    parents, partners, ts = [], [], []
    for i, n_draws in enumerate(counts):
        if not n_draws:
            continue
        rng = child_rng(cfg.seed, "smote", i)
        picks = rng.integers(0, cfg.k_neighbors, size=n_draws)
        t = rng.random(n_draws)
        parents.append(np.full(n_draws, i))
        partners.append(neighbors[i, picks])
        ts.append(t)
    parent = np.concatenate(parents)
    partner = np.concatenate(partners)
    t = np.concatenate(ts)
    synthetic = X[parent] + t[:, None] * (X[partner] - X[parent])
    return synthetic, parent, partner


def smote(minority: Dataset, cfg: SmoteConfig) -> Dataset:
    """Synthetic malicious samples generated from ``minority``'s rows."""
    synthetic, parent, _ = smote_matrix(minority.X, cfg)
    ids = tuple(f"smote-{i}-{minority.ids[p]}" for i, p in enumerate(parent))
    return Dataset(ids, synthetic, np.full(len(ids), MALICIOUS), minority.feature_names)


def balance(train: Dataset, k_neighbors: int = 5, seed: int = 0) -> Dataset:
    """Oversample the malicious class of ``train`` up to the legitimate count."""
    train.require_both_classes()
    counts = train.class_counts()
    minority = train.subset(np.flatnonzero(train.y == MALICIOUS))
    cfg = SmoteConfig(k_neighbors=k_neighbors, target_count=max(counts[0], counts[1]), seed=seed)
    return train.concat(smote(minority, cfg))
