"""Labeled feature matrices: CSV I/O, bytecode ingestion and train/test splits."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from evmlime import disasm
from evmlime.errors import (
    DataError,
    EmptyDataset,
    MissingFile,
    MissingLabelColumn,
    NonNumericCell,
    RaggedRow,
    SingleClassDataset,
)

LEGITIMATE, MALICIOUS = 0, 1


class LabeledSample(NamedTuple):
    id: str
    features: dict[str, float]
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row-aligned ids, feature matrix and 0/1 labels with one column order."""

    ids: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64).reshape(len(self.ids), len(self.feature_names))
        y = np.asarray(self.y, dtype=np.int64).reshape(len(self.ids))
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 (legitimate) or 1 (malicious)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def empty(cls, feature_names: Sequence[str] = disasm.VOCABULARY) -> "Dataset":
        return cls((), np.zeros((0, len(feature_names))), np.zeros(0, dtype=np.int64), tuple(feature_names))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[LabeledSample]:
        for i, sid in enumerate(self.ids):
            yield LabeledSample(sid, dict(zip(self.feature_names, self.X[i].tolist())), int(self.y[i]))

    @property
    def samples(self) -> list[LabeledSample]:
        return list(self)

    def class_counts(self) -> dict[int, int]:
        return {LEGITIMATE: int((self.y == 0).sum()), MALICIOUS: int((self.y == 1).sum())}

    def require_both_classes(self) -> None:
        counts = self.class_counts()
        if not (counts[0] and counts[1]):
            raise SingleClassDataset(f"need both classes, got counts {counts}")

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(tuple(self.ids[i] for i in index), self.X[index], self.y[index], self.feature_names)

    def select_features(self, names: Sequence[str]) -> "Dataset":
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(self.ids, self.X[:, cols], self.y, tuple(names))

    def with_matrix(self, X: np.ndarray, feature_names: Sequence[str] | None = None) -> "Dataset":
        return Dataset(self.ids, X, self.y, tuple(feature_names or self.feature_names))

    def concat(self, other: "Dataset") -> "Dataset":
        if other.feature_names != self.feature_names:
            raise DataError("cannot concatenate datasets with different feature orderings")
        return Dataset(self.ids + other.ids, np.vstack([self.X, other.X]),
                       np.concatenate([self.y, other.y]), self.feature_names)


def _parse_number(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise NonNumericCell(f"row {row}, column {col!r}: {cell!r} is not numeric") from None
    if not math.isfinite(value):
        raise NonNumericCell(f"row {row}, column {col!r}: {cell!r} is not finite")
    return value


def load_csv(path: str | os.PathLike) -> Dataset:
    """Read a feature CSV: optional leading ``id`` column, features, final ``label``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise EmptyDataset(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "label":
        raise MissingLabelColumn(f"{path}: last header column must be 'label'")
    has_id = header[0] == "id"
    names = header[1 if has_id else 0:-1]
    ids, X, y = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RaggedRow(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        if any(c.strip() == "" for c in row):
            raise NonNumericCell(f"{path}:{lineno}: missing cell")
        cells = row[1:] if has_id else row
        values = [_parse_number(c, lineno, col) for c, col in zip(cells, names + ["label"])]
        label = values.pop()
        if label not in (0.0, 1.0):
            raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {row[-1]!r}")
        ids.append(row[0] if has_id else str(lineno - 2))
        X.append(values)
        y.append(int(label))
    return Dataset(tuple(ids), np.array(X, dtype=np.float64).reshape(len(ids), len(names)),
                   np.array(y, dtype=np.int64), tuple(names))


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_csv(ds: Dataset, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *ds.feature_names, "label"])
        for sid, row, label in zip(ds.ids, ds.X, ds.y):
            w.writerow([sid, *map(_fmt, row), int(label)])


@dataclass(frozen=True)
class SplitSpec:
    malicious_train_fraction: float = 0.7
    legitimate_train_fraction: float = 0.9914
    seed: int = 0

    def __post_init__(self):
        for f in (self.malicious_train_fraction, self.legitimate_train_fraction):
            if not 0.0 < f < 1.0:
                raise ValueError(f"train fractions must lie in (0, 1), got {f}")


def stratified_split(ds: Dataset, spec: SplitSpec, rng: np.random.Generator | None = None) -> tuple[Dataset, Dataset]:
    """Per class, floor(fraction * count) shuffled rows go to train, the rest to test.

    Both outputs keep the input row order.
    """
    ds.require_both_classes()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    train_idx = []
    for label, frac in ((LEGITIMATE, spec.legitimate_train_fraction), (MALICIOUS, spec.malicious_train_fraction)):
        members = np.flatnonzero(ds.y == label)
        n_train = math.floor(frac * len(members) + 1e-9)
        train_idx.append(rng.permutation(members)[:n_train])
    in_train = np.zeros(len(ds), dtype=bool)
    in_train[np.concatenate(train_idx)] = True
    return ds.subset(np.flatnonzero(in_train)), ds.subset(np.flatnonzero(~in_train))


def read_manifest(path: str | os.PathLike) -> dict[str, int]:
    with open(path) as fh:
        manifest = json.load(fh)
    if not isinstance(manifest, dict):
        raise DataError(f"{path}: manifest must be a JSON object of file name -> label")
    return {str(k): int(v) for k, v in manifest.items()}


def build_from_bytecode_dir(directory: str | os.PathLike, manifest: Mapping[str, int]) -> Dataset:
    """Featurize one hex file per manifest entry, in sorted file-name order."""
    directory = Path(directory)
    ids, rows, labels = [], [], []
    for name in sorted(manifest):
        path = directory / name
        if not path.is_file():
            raise MissingFile(f"{path}: listed in manifest but not found")
        try:
            code = disasm.decode_hex(path.read_text())
        except DataError as exc:
            raise type(exc)(f"{path}: {exc}") from None
        counts, _ = disasm.frequency_array(code)
        ids.append(name)
        rows.append(counts)
        labels.append(int(manifest[name]))
    if not ids:
        return Dataset.empty()
    return Dataset(tuple(ids), np.vstack(rows), np.array(labels), disasm.VOCABULARY)


def build_from_hex_list(path: str | os.PathLike, label: int) -> Dataset:
    """Featurize a newline-delimited list of hex strings sharing one label."""
    ids, rows = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                counts, _ = disasm.frequency_array(disasm.decode_hex(line))
            except DataError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from None
            ids.append(f"{Path(path).stem}:{lineno}")
            rows.append(counts)
    if not ids:
        return Dataset.empty()
    return Dataset(tuple(ids), np.vstack(rows), np.full(len(ids), label), disasm.VOCABULARY)
