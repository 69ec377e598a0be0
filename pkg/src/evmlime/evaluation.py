"""Confusion-matrix metrics, comparison tables and contribution charts.

Malicious (label 1) is the positive class throughout. Ratios whose
denominator is zero are ``None`` and print as ``N/A``.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from evmlime.errors import EmptyInput, LengthMismatch
from evmlime.explain import MALICIOUS_CLASS, Explanation

NA = "N/A"
METRIC_NAMES = ("tpr", "fpr", "precision", "accuracy", "f1")

# Baseline figures reported for Forta's production detector.
FORTA_BASELINE = {"method": "Forta", "tpr": 0.59, "fpr": None, "precision": 0.88, "accuracy": None, "f1": None}

IMBALANCE_FOOTNOTE = ("accuracy is dominated by the legitimate majority on imbalanced test sets; "
                      "read it together with TPR and FPR")


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def confusion(self) -> tuple[int, int, int, int]:
        return self.tp, self.fp, self.tn, self.fn

    @property
    def tpr(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def fpr(self) -> float | None:
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def precision(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def accuracy(self) -> float | None:
        return _ratio(self.tp + self.tn, self.tp + self.fp + self.tn + self.fn)

    @property
    def f1(self) -> float | None:
        p, r = self.precision, self.tpr
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in METRIC_NAMES}
        out.update(tp=self.tp, fp=self.fp, tn=self.tn, fn=self.fn)
        return out


def score(predictions: Sequence[int], truths: Sequence[int]) -> Metrics:
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(truths, dtype=np.int64)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {true.size} labels")
    if pred.size == 0:
        raise EmptyInput("cannot score empty predictions")
    if not (np.isin(pred, (0, 1)).all() and np.isin(true, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return Metrics(tp=int(((pred == 1) & (true == 1)).sum()), fp=int(((pred == 1) & (true == 0)).sum()),
                   tn=int(((pred == 0) & (true == 0)).sum()), fn=int(((pred == 0) & (true == 1)).sum()))


def fmt(value: float | None, digits: int = 2) -> str:
    return NA if value is None else f"{value:.{digits}f}"


def metrics_table(rows: Sequence[tuple[str, Metrics]], first_column: str = "Algorithm", digits: int = 2) -> str:
    """CSV with one row per (name, metrics) in the TPR/FPR/Precision/Accuracy/F1 layout."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([first_column, "TPR", "FPR", "Precision", "Accuracy", "F1Score"])
    for name, m in rows:
        w.writerow([name, *(fmt(getattr(m, k), digits) for k in METRIC_NAMES)])
    return buf.getvalue()


def compare_report(ours: Metrics, baselines: Sequence[dict] = (FORTA_BASELINE,),
                   name: str = "Proposed Method", digits: int = 2) -> str:
    """Comparison CSV: our row first, then each baseline; missing values print N/A."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Method", "TPR", "FPR", "Precision", "Accuracy", "F1Score"])
    w.writerow([name, *(fmt(getattr(ours, k), digits) for k in METRIC_NAMES)])
    for row in baselines:
        w.writerow([row["method"], *(fmt(row.get(k), digits) for k in METRIC_NAMES)])
    return buf.getvalue()


def contribution_csv(e: Explanation) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "signed_contribution"])
    for feature, value in e.signed().items():
        w.writerow([feature, repr(value)])
    return buf.getvalue()


def contribution_svg(e: Explanation, title: str = "") -> str:
    """Bar chart: bars above the axis support Malicious, below support Legitimate."""
    signed = e.signed()
    names = list(signed)
    values = [signed[n] for n in names]
    bar, gap, left, top, plot_h, label_h = 22, 14, 60, 40, 240, 120
    width = left + max(1, len(names)) * (bar + gap) + gap
    height = top + plot_h + label_h
    peak = max([abs(v) for v in values] + [1e-12])
    mid = top + plot_h / 2
    scale = (plot_h / 2 - 10) / peak
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="14" y="{mid:.1f}" transform="rotate(-90 14 {mid:.1f})" text-anchor="middle">Contribution</text>',
        f'<rect x="{width - 150}" y="26" width="10" height="10" fill="#3366cc"/>'
        f'<text x="{width - 136}" y="35">{MALICIOUS_CLASS}</text>',
        f'<rect x="{width - 75}" y="26" width="10" height="10" fill="#f4a6c0"/>'
        f'<text x="{width - 61}" y="35">Legitimate</text>',
    ]
    for i, (name, v) in enumerate(zip(names, values)):
        x = left + gap + i * (bar + gap)
        h = abs(v) * scale
        y = mid - h if v > 0 else mid
        color = "#3366cc" if v > 0 else "#f4a6c0"
        parts.append(f'<rect x="{x}" y="{y:.2f}" width="{bar}" height="{h:.2f}" fill="{color}" stroke="black" '
                     f'stroke-width="0.5"><title>{escape(name)}: {v:.4f}</title></rect>')
        lx, ly = x + bar / 2, top + plot_h + 6
        parts.append(f'<text x="{lx:.1f}" y="{ly:.1f}" transform="rotate(90 {lx:.1f} {ly:.1f})">{escape(name)}</text>')
    parts.append(f'<line x1="{left}" y1="{mid:.1f}" x2="{width - gap / 2}" y2="{mid:.1f}" stroke="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_contribution_chart(e: Explanation, path: str | os.PathLike, title: str = "") -> tuple[str, str]:
    """Write ``path`` (SVG) and a sibling ``.csv`` with the signed contributions."""
    if not e.entries:
        raise ValueError("explanation has no entries to plot")
    svg_path = os.fspath(path)
    csv_path = os.path.splitext(svg_path)[0] + ".csv"
    with open(svg_path, "w") as fh:
        fh.write(contribution_svg(e, title))
    with open(csv_path, "w") as fh:
        fh.write(contribution_csv(e))
    return svg_path, csv_path
