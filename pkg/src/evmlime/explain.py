"""Local surrogate (LIME) explanations for single predictions over binary features."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from evmlime.classify import Classifier
from evmlime.errors import DimensionMismatch, SingularSystem

MALICIOUS_CLASS = "Malicious"
LEGITIMATE_CLASS = "Legitimate"
RIDGE_JITTER = 1e-8


@dataclass(frozen=True)
class LimeConfig:
    n_perturbations: int = 5000
    kernel_width: float | None = None  # None -> 0.75 * sqrt(d)
    seed: int = 0

    def __post_init__(self):
        if self.n_perturbations < 1:
            raise ValueError("n_perturbations must be positive")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValueError("kernel_width must be positive")

    def width(self, d: int) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(d)


@dataclass(frozen=True)
class ExplanationEntry:
    feature: str
    actual_bit: int
    supported_class: str
    contribution: float
    weight: float  # surrogate coefficient on the raw bit


@dataclass(frozen=True)
class Explanation:
    instance_id: str
    predicted_label: int
    entries: list[ExplanationEntry]
    intercept: float
    model_score: float | None = None
    local_prediction: float | None = None
    kernel_width: float | None = None
    feature_order: list[str] = field(default_factory=list)

    def signed(self) -> dict[str, float]:
        """Contribution per feature, positive toward Malicious, negative toward Legitimate."""
        return {e.feature: (e.contribution if e.supported_class == MALICIOUS_CLASS else -e.contribution)
                for e in self.entries}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, raw: dict) -> "Explanation":
        entries = [ExplanationEntry(**e) for e in raw["entries"]]
        return cls(**{**raw, "entries": entries})

    def table_rows(self) -> list[list]:
        return [[e.feature, e.actual_bit, e.supported_class, f"{e.contribution:.4f}"] for e in self.entries]

    def format_table(self) -> str:
        header = ["Feature", "Actual Label Value", "Supported Class Label", "Contribution"]
        rows = [header] + [[str(c) for c in r] for r in self.table_rows()]
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def perturb(x, cfg: LimeConfig, marginals) -> np.ndarray:
    """Draw ``n_perturbations`` binary vectors around ``x``.

    Row 0 is ``x`` itself; every other bit is drawn independently with
    P(bit = 1) equal to that feature's training marginal.
    """
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    marginals = np.clip(np.asarray(marginals, dtype=np.float64), 0.0, 1.0)
    if marginals.shape != x.shape:
        raise DimensionMismatch(f"{len(marginals)} marginals for a {len(x)}-feature instance")
    rng = np.random.default_rng(cfg.seed)
    Z = (rng.random((cfg.n_perturbations, len(x))) < marginals).astype(np.uint8)
    Z[0] = x
    return Z


def proximity(x, z, sigma: float) -> float:
    """exp(-D^2 / sigma^2) with D the Euclidean distance."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {z.shape} differ")
    return math.exp(-float(np.sum((x - z) ** 2)) / sigma**2)


def weighted_least_squares(Z: np.ndarray, f: np.ndarray, weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Intercept and coefficients minimizing sum w (f - b - Z c)^2.

    Columns that never vary carry no signal and get coefficient 0. If the
    remaining columns are collinear the perturbation set cannot identify the
    surrogate and SingularSystem is raised.
    """
    Z = np.asarray(Z, dtype=np.float64)
    coef = np.zeros(Z.shape[1])
    varying = np.flatnonzero(Z.min(axis=0) != Z.max(axis=0))
    A = np.hstack([np.ones((len(Z), 1)), Z[:, varying]])
    sw = np.sqrt(weights)[:, None]
    if np.linalg.matrix_rank(A * sw) < A.shape[1]:
        raise SingularSystem("perturbations are collinear; draw more (or more varied) samples")
    M = A.T @ (A * weights[:, None]) + RIDGE_JITTER * np.eye(A.shape[1])
    beta = np.linalg.solve(M, A.T @ (weights * f))
    coef[varying] = beta[1:]
    return float(beta[0]), coef


def fit_surrogate(model: Classifier, x, cfg: LimeConfig, marginals, instance_id: str = "",
                  feature_names: Sequence[str] | None = None) -> Explanation:
    """Explain ``model``'s malicious score at ``x`` with a proximity-weighted linear fit."""
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    names = list(feature_names or model.feature_names)
    if len(names) != len(x):
        raise DimensionMismatch(f"{len(names)} feature names for a {len(x)}-feature instance")
    d = len(x)
    if cfg.n_perturbations < d + 1:
        raise SingularSystem(f"need at least {d + 1} perturbations for {d} features")
    sigma = cfg.width(d)
    Z = perturb(x, cfg, marginals)
    f = model.scores(Z)
    dist2 = (Z != x).sum(axis=1).astype(np.float64)
    weights = np.exp(-dist2 / sigma**2)
    intercept, coef = weighted_least_squares(Z, f, weights)
    entries = []
    for name, bit, w in zip(names, x.tolist(), coef.tolist()):
        term = w * (2 * bit - 1)
        entries.append(ExplanationEntry(name, int(bit), MALICIOUS_CLASS if term > 0 else LEGITIMATE_CLASS,
                                        abs(term), w))
    entries.sort(key=lambda e: -e.contribution)
    pred = model.predict(x)
    return Explanation(instance_id, pred.label, entries, intercept, pred.score,
                       intercept + float(coef @ x), sigma, names)


def aggregate_verdict(e: Explanation) -> str:
    """Class whose supporting contributions sum higher; ties defer to the model."""
    mal = sum(x.contribution for x in e.entries if x.supported_class == MALICIOUS_CLASS)
    leg = sum(x.contribution for x in e.entries if x.supported_class == LEGITIMATE_CLASS)
    if math.isclose(mal, leg, rel_tol=0.0, abs_tol=1e-12):
        return MALICIOUS_CLASS if e.predicted_label == 1 else LEGITIMATE_CLASS
    return MALICIOUS_CLASS if mal > leg else LEGITIMATE_CLASS


def write_table_csv(e: Explanation, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "actual_bit", "supported_class", "contribution"])
        for entry in e.entries:
            w.writerow([entry.feature, entry.actual_bit, entry.supported_class, repr(entry.contribution)])


def write_json(e: Explanation, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(e.to_json() + "\n")


def read_json(path: str | os.PathLike) -> Explanation:
    with open(path) as fh:
        return Explanation.from_dict(json.load(fh))
