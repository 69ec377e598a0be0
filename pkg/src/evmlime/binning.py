"""Entropy-based supervised binning: one split point per feature, then 0/1 bits.

A value maps to bit 1 when it is at or above the feature's split point. The
same ``>=`` rule decides bin membership while the split is being learned.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from evmlime import _kernels
from evmlime.dataset import Dataset
from evmlime.errors import EmptyInput, MissingFeature

NO_SPLIT = math.inf
# gains this close to the maximum count as ties (resolved to the smallest candidate)
GAIN_TIE_TOL = 1e-12


def entropy(labels) -> float:
    """Shannon entropy in bits of a multiset of class ids."""
    labels = list(labels)
    if not labels:
        raise EmptyInput("entropy of an empty label set")
    return _entropy_counts(Counter(labels).values(), len(labels))


def _entropy_counts(counts, n: int) -> float:
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / n
            h -= p * math.log2(p)
    return h


def information_gain(values, labels, split: float) -> float:
    """Entropy reduction from partitioning at ``split`` (bin 1 is ``value >= split``)."""
    values = list(values)
    labels = list(labels)
    if not values or len(values) != len(labels):
        raise EmptyInput("information gain needs equally long, non-empty values and labels")
    n = len(labels)
    high = [lab for v, lab in zip(values, labels) if v >= split]
    low = [lab for v, lab in zip(values, labels) if not v >= split]
    gain = _entropy_counts(Counter(labels).values(), n)
    for part in (low, high):
        if part:
            gain -= len(part) / n * _entropy_counts(Counter(part).values(), len(part))
    return gain


def best_split(values, labels) -> float:
    """Split point with maximal information gain.

    Candidates are the distinct observed values and the midpoints between
    consecutive ones; ties go to the smallest candidate. A constant feature
    has no split and returns ``inf``, which bins every value to 0.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    if values.size == 0 or values.shape != labels.shape:
        raise EmptyInput("best_split needs equally long, non-empty values and labels")
    order = np.argsort(values, kind="stable")
    v = np.ascontiguousarray(values[order])
    if v[0] == v[-1]:
        return NO_SPLIT
    classes, codes = np.unique(labels[order], return_inverse=True)
    positions, gains = _kernels.scan_boundaries(v, codes.astype(np.int64), len(classes))
    top = gains.max()
    # the lowest observed value always scores 0 and undercuts every midpoint
    if top <= GAIN_TIE_TOL:
        return float(v[0])
    j = int(np.flatnonzero(gains >= top - GAIN_TIE_TOL)[0])
    i = positions[j]
    return float((v[i] + v[i + 1]) / 2)


@dataclass(frozen=True)
class BinningModel:
    split_points: Mapping[str, float]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        missing = [f for f in self.feature_names if f not in self.split_points]
        if missing:
            raise MissingFeature(f"no split point for {missing}")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "split_points", {f: float(self.split_points[f]) for f in self.feature_names})

    def thresholds(self, names: Sequence[str] | None = None) -> np.ndarray:
        return np.array([self.split_points[f] for f in (names or self.feature_names)])

    def to_json(self) -> str:
        payload = {f: ("inf" if math.isinf(s) else s) for f, s in self.split_points.items()}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BinningModel":
        raw = json.loads(text)
        points = {f: (math.inf if s == "inf" else float(s)) for f, s in raw.items()}
        return cls(points, tuple(raw))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "BinningModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def fit(train: Dataset) -> BinningModel:
    """Learn split points column by column from the training rows only."""
    train.require_both_classes()
    points = {name: best_split(train.X[:, j], train.y) for j, name in enumerate(train.feature_names)}
    return BinningModel(points, train.feature_names)


def transform(vector: Mapping[str, float], model: BinningModel) -> list[int]:
    """Bits for one frequency mapping (feature name -> count)."""
    try:
        return [int(vector[f] >= model.split_points[f]) for f in model.feature_names]
    except KeyError as exc:
        raise MissingFeature(f"frequency vector lacks feature {exc.args[0]!r}") from None


def transform_matrix(X: np.ndarray, feature_names: Sequence[str], model: BinningModel) -> np.ndarray:
    cols = []
    for f in model.feature_names:
        if f not in feature_names:
            raise MissingFeature(f"input lacks feature {f!r}")
        cols.append(feature_names.index(f))
    return (np.asarray(X)[:, cols] >= model.thresholds()).astype(np.uint8)


def transform_dataset(ds: Dataset, model: BinningModel) -> Dataset:
    return Dataset(ds.ids, transform_matrix(ds.X, list(ds.feature_names), model), ds.y, model.feature_names)
