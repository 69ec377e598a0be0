"""Classifiers over binary opcode features and extra-trees feature ranking.

All four models score a row with the probability-like value of class 1
(malicious) and label it 1 only when that score is strictly above 0.5, so an
exact tie is called legitimate.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from evmlime import _kernels
from evmlime.dataset import Dataset
from evmlime.errors import DataError, DimensionMismatch, NonBinaryFeature, SingleClassDataset
from evmlime.seeding import child_rng

ALGORITHMS = ("nb", "lr", "dt", "knn")


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float


def _as_bits(X, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionMismatch(f"expected {n_features} features, got {X.shape[1]}")
    if X.size and not np.isin(X, (0, 1)).all():
        raise NonBinaryFeature("classifier inputs must be 0/1 feature vectors")
    return X.astype(np.uint8)


def _entropy_cols(c0: np.ndarray, c1: np.ndarray) -> np.ndarray:
    """Binary entropy (bits) elementwise from class weights; 0 where empty."""
    n = c0 + c1
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.zeros(np.broadcast(c0, c1).shape)
        for c in (c0, c1):
            p = np.where(n > 0, c / np.where(n > 0, n, 1), 0.0)
            h -= np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return h


def _patterns(X: np.ndarray, y: np.ndarray):
    """Distinct rows with their per-class weights; trees only need these."""
    patterns, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    w1 = np.bincount(inverse, weights=y, minlength=len(patterns))
    w0 = np.bincount(inverse, weights=1 - y, minlength=len(patterns))
    return patterns, w0, w1


def _split_gains(P: np.ndarray, w0: np.ndarray, w1: np.ndarray, features: np.ndarray):
    """Information gain of splitting on each bit in ``features`` (bit 1 goes right)."""
    Pf = P[:, features].astype(np.float64)
    r0, r1 = w0 @ Pf, w1 @ Pf
    t0, t1 = w0.sum(), w1.sum()
    l0, l1 = t0 - r0, t1 - r1
    n = t0 + t1
    gain = (_entropy_cols(np.float64(t0), np.float64(t1))
            - (l0 + l1) / n * _entropy_cols(l0, l1)
            - (r0 + r1) / n * _entropy_cols(r0, r1))
    return gain, l0 + l1, r0 + r1


class Classifier:
    algorithm = ""

    def __init__(self, feature_names: Sequence[str] = ()):
        self.feature_names = tuple(feature_names)

    def fit(self, X, y) -> "Classifier":
        raise NotImplementedError

    def scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def labels(self, X) -> np.ndarray:
        return (self.scores(X) > 0.5).astype(np.int64)

    def predict(self, v) -> Prediction:
        score = float(self.scores(v)[0])
        return Prediction(int(score > 0.5), score)

    def hyperparams(self) -> dict:
        return {}

    def params(self) -> dict:
        raise NotImplementedError

    def set_params(self, params: dict) -> None:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "feature_names": list(self.feature_names),
                "hyperparams": self.hyperparams(), "params": self.params()}

    def _check(self, X) -> np.ndarray:
        return _as_bits(X, len(self.feature_names))


class NaiveBayes(Classifier):
    """Bernoulli naive Bayes with additive smoothing ``alpha``."""

    algorithm = "nb"

    def __init__(self, feature_names=(), alpha: float = 1.0):
        super().__init__(feature_names)
        self.alpha = alpha

    def fit(self, X, y):
        X = _as_bits(X).astype(np.float64)
        y = np.asarray(y)
        n = np.array([(y == 0).sum(), (y == 1).sum()], dtype=np.float64)
        ones = np.vstack([X[y == 0].sum(axis=0), X[y == 1].sum(axis=0)])
        self.log_prior = np.log(n / n.sum())
        p1 = (ones + self.alpha) / (n[:, None] + 2 * self.alpha)
        self.log_p1 = np.log(p1)
        self.log_p0 = np.log1p(-p1)
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = self._check(X).astype(np.float64)
        return self.log_prior[None, :] + X @ self.log_p1.T + (1 - X) @ self.log_p0.T

    def scores(self, X):
        jll = self.joint_log_likelihood(X)
        return 1.0 / (1.0 + np.exp(jll[:, 0] - jll[:, 1]))

    def hyperparams(self):
        return {"alpha": self.alpha}

    def params(self):
        return {"log_prior": self.log_prior.tolist(), "log_p1": self.log_p1.tolist(),
                "log_p0": self.log_p0.tolist()}

    def set_params(self, params):
        self.log_prior = np.array(params["log_prior"])
        self.log_p1 = np.array(params["log_p1"])
        self.log_p0 = np.array(params["log_p0"])


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LogisticRegression(Classifier):
    """Batch gradient descent on mean log-loss plus optional L2 on the weights."""

    algorithm = "lr"

    def __init__(self, feature_names=(), learning_rate: float = 0.1, epochs: int = 500, l2: float = 0.0):
        super().__init__(feature_names)
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2

    def loss(self, X, y, w=None, b=None) -> float:
        w = self.weights if w is None else w
        b = self.bias if b is None else b
        z = X @ w + b
        # log(1 + e^z) - y z, computed stably
        return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * self.l2 * w @ w)

    def fit(self, X, y):
        X = _as_bits(X).astype(np.float64)
        y = np.asarray(y, dtype=np.float64)
        m, d = X.shape
        self.weights = np.zeros(d)
        self.bias = 0.0
        self.loss_history = [self.loss(X, y)]
        for _ in range(self.epochs):
            err = _sigmoid(X @ self.weights + self.bias) - y
            grad_w = X.T @ err / m + self.l2 * self.weights
            grad_b = err.mean()
            self.weights = self.weights - self.learning_rate * grad_w
            self.bias = self.bias - self.learning_rate * grad_b
            self.loss_history.append(self.loss(X, y))
        return self

    def scores(self, X):
        X = self._check(X).astype(np.float64)
        return _sigmoid(X @ self.weights + self.bias)

    def hyperparams(self):
        return {"learning_rate": self.learning_rate, "epochs": self.epochs, "l2": self.l2}

    def params(self):
        return {"weights": self.weights.tolist(), "bias": self.bias}

    def set_params(self, params):
        self.weights = np.array(params["weights"], dtype=np.float64)
        self.bias = float(params["bias"])


class DecisionTree(Classifier):
    """Information-gain tree on bits. Leaves score the fraction of class 1."""

    algorithm = "dt"

    def __init__(self, feature_names=(), max_depth: int | None = 16, min_samples_leaf: int = 1):
        super().__init__(feature_names)
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X = _as_bits(X)
        P, w0, w1 = _patterns(X, np.asarray(y, dtype=np.float64))
        self.feature, self.left, self.right, self.value = [], [], [], []
        self._grow(P, w0, w1, np.arange(len(P)), 0)
        return self

    def _leaf(self, w0, w1):
        self.feature.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(w1 / (w0 + w1)))
        return len(self.feature) - 1

    def _grow(self, P, w0, w1, idx, depth):
        t0, t1 = w0[idx].sum(), w1[idx].sum()
        if t0 == 0 or t1 == 0 or (self.max_depth is not None and depth >= self.max_depth):
            return self._leaf(t0, t1)
        features = np.arange(P.shape[1])
        gain, n_left, n_right = _split_gains(P[idx], w0[idx], w1[idx], features)
        ok = (n_left >= self.min_samples_leaf) & (n_right >= self.min_samples_leaf) & (n_left > 0) & (n_right > 0)
        if not ok.any():
            return self._leaf(t0, t1)
        gain = np.where(ok, gain, -np.inf)
        j = int(np.flatnonzero(gain >= gain.max() - 1e-12)[0])
        node = len(self.feature)
        self.feature.append(j)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(t1 / (t0 + t1)))
        bit = P[idx, j] == 1
        self.left[node] = self._grow(P, w0, w1, idx[~bit], depth + 1)
        self.right[node] = self._grow(P, w0, w1, idx[bit], depth + 1)
        return node

    @property
    def depth(self) -> int:
        def walk(i):
            return 0 if self.feature[i] < 0 else 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def scores(self, X):
        X = self._check(X)
        out = np.empty(len(X))
        for r, row in enumerate(X):
            i = 0
            while self.feature[i] >= 0:
                i = self.right[i] if row[self.feature[i]] else self.left[i]
            out[r] = self.value[i]
        return out

    def hyperparams(self):
        return {"max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf}

    def params(self):
        return {"feature": self.feature, "left": self.left, "right": self.right, "value": self.value}

    def set_params(self, params):
        self.feature = list(params["feature"])
        self.left = list(params["left"])
        self.right = list(params["right"])
        self.value = [float(v) for v in params["value"]]


def pack_bits(X: np.ndarray) -> np.ndarray:
    """Pack 0/1 rows into uint64 words (little-endian bit order)."""
    X = np.asarray(X, dtype=np.uint8)
    n, d = X.shape
    words = max(1, math.ceil(d / 64))
    padded = np.zeros((n, words * 64), dtype=np.uint8)
    padded[:, :d] = X
    return np.ascontiguousarray(np.packbits(padded, axis=1, bitorder="little").view("<u8").astype(np.uint64))


class KNearestNeighbors(Classifier):
    """Hamming-distance vote over the k nearest training rows (lower index wins ties)."""

    algorithm = "knn"

    def __init__(self, feature_names=(), k: int = 5):
        super().__init__(feature_names)
        if k < 1 or k % 2 == 0:
            raise ValueError("k must be a positive odd integer")
        self.k = k

    def fit(self, X, y):
        X = _as_bits(X)
        if len(X) < self.k:
            raise DataError(f"KNN needs at least k={self.k} training rows, got {len(X)}")
        self.train_X = X
        self.train_y = np.asarray(y, dtype=np.uint8)
        self._packed = pack_bits(X)
        return self

    def scores(self, X):
        X = self._check(X)
        votes = _kernels.knn_positive_counts(self._packed, np.ascontiguousarray(self.train_y),
                                             pack_bits(X), self.k)
        return np.asarray(votes, dtype=np.float64) / self.k

    def hyperparams(self):
        return {"k": self.k}

    def params(self):
        return {"train_X": ["".join(map(str, row)) for row in self.train_X.tolist()],
                "train_y": self.train_y.tolist()}

    def set_params(self, params):
        X = np.array([[int(c) for c in row] for row in params["train_X"]], dtype=np.uint8)
        self.fit(X.reshape(len(params["train_y"]), len(self.feature_names)), params["train_y"])


_MODELS = {cls.algorithm: cls for cls in (NaiveBayes, LogisticRegression, DecisionTree, KNearestNeighbors)}


def train(algorithm: str, ds: Dataset, seed: int = 0, **hyperparams) -> Classifier:
    """Fit one of ``ALGORITHMS`` on a binary dataset.

    None of the models draw random numbers (LR starts at zero weights, trees
    break ties by feature index), so ``seed`` only travels into the saved
    model for provenance.
    """
    if algorithm not in _MODELS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    counts = ds.class_counts()
    if not (counts[0] and counts[1]):
        raise SingleClassDataset(f"need both classes, got counts {counts}")
    model = _MODELS[algorithm](ds.feature_names, **hyperparams)
    model.seed = seed
    return model.fit(ds.X, ds.y)


def predict(model: Classifier, v) -> Prediction:
    return model.predict(v)


def model_to_json(model: Classifier) -> str:
    payload = model.to_dict()
    payload["seed"] = getattr(model, "seed", 0)
    return json.dumps(payload, indent=1)


def model_from_json(text: str) -> Classifier:
    raw = json.loads(text)
    model = _MODELS[raw["algorithm"]](raw["feature_names"], **raw.get("hyperparams", {}))
    model.seed = raw.get("seed", 0)
    model.set_params(raw["params"])
    return model


def save_model(model: Classifier, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_json(model) + "\n")


def load_model(path: str | os.PathLike) -> Classifier:
    with open(path) as fh:
        return model_from_json(fh.read())


# --- extra-trees feature ranking -------------------------------------------------

def _random_tree_importance(P, w0, w1, n_sub: int, rng: np.random.Generator, total: float) -> np.ndarray:
    d = P.shape[1]
    imp = np.zeros(d)
    stack = [np.arange(len(P))]
    while stack:
        idx = stack.pop()
        t0, t1 = w0[idx].sum(), w1[idx].sum()
        if t0 == 0 or t1 == 0 or len(idx) < 2:
            continue
        order = rng.permutation(d)
        sub = P[idx][:, order]
        varying = order[(sub.min(axis=0) != sub.max(axis=0))][:n_sub]
        if varying.size == 0:
            continue
        gain, _, _ = _split_gains(P[idx], w0[idx], w1[idx], varying)
        # ties resolve to the earliest feature in this node's random order
        pos = int(np.flatnonzero(gain >= gain.max() - 1e-12)[0])
        j = varying[pos]
        imp[j] += (t0 + t1) / total * max(float(gain[pos]), 0.0)
        bit = P[idx, j] == 1
        stack.append(idx[bit])
        stack.append(idx[~bit])
    return imp


def rank_features(train: Dataset, n_trees: int = 200, seed: int = 0,
                  max_features: int | None = None) -> list[tuple[str, float]]:
    """Extra-trees importance ranking on binary features, most important first.

    Each node draws a random subset of ``ceil(sqrt(d))`` non-constant
    features and splits on the best of them; a feature's importance is the
    sample-weighted information gain it earns across all trees, normalized
    to sum to 1. With no gain anywhere every feature gets ``1/d``.
    """
    counts = train.class_counts()
    if not (counts[0] and counts[1]):
        raise SingleClassDataset(f"need both classes, got counts {counts}")
    X = _as_bits(train.X)
    d = X.shape[1]
    n_sub = max_features or math.ceil(math.sqrt(d))
    P, w0, w1 = _patterns(X, train.y.astype(np.float64))
    total = float(len(X))
    imp = np.zeros(d)
    for t in range(n_trees):
        imp += _random_tree_importance(P, w0, w1, n_sub, child_rng(seed, "extra_trees", t), total)
    imp = imp / imp.sum() if imp.sum() > 0 else np.full(d, 1.0 / d)
    order = sorted(range(d), key=lambda j: (-imp[j], j))
    return [(train.feature_names[j], float(imp[j])) for j in order]


def select_top(ranking: Sequence[tuple[str, float]], m: int) -> list[str]:
    """Names of the ``m`` most important features, in ranking order."""
    if m > len(ranking):
        raise ValueError(f"cannot select {m} of {len(ranking)} features")
    return [name for name, _ in ranking[:m]]
