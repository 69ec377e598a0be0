import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evmlime.errors import EmptyInput, LengthMismatch
from evmlime.evaluation import (
    FORTA_BASELINE,
    Metrics,
    compare_report,
    contribution_svg,
    emit_contribution_chart,
    metrics_table,
    score,
)
from evmlime.explain import LEGITIMATE_CLASS, MALICIOUS_CLASS, Explanation, ExplanationEntry
from oracles import confusion


def test_all_correct():
    m = score([1, 0, 1, 0], [1, 0, 1, 0])
    assert (m.tpr, m.fpr, m.f1, m.precision, m.accuracy) == (1.0, 0.0, 1.0, 1.0, 1.0)


def test_hand_arithmetic():
    m = Metrics(tp=9, fp=1, tn=99, fn=1)
    assert m.tpr == pytest.approx(0.9) and m.fpr == pytest.approx(0.01) and m.precision == pytest.approx(0.9)
    assert m.accuracy == pytest.approx(108 / 110)


def test_not_applicable():
    m = score([0, 0], [0, 0])
    assert m.tpr is None and m.precision is None and m.f1 is None
    assert m.fpr == 0.0
    assert "N/A" in metrics_table([("x", m)])


def test_errors():
    with pytest.raises(LengthMismatch):
        score([1], [1, 0])
    with pytest.raises(EmptyInput):
        score([], [])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200))
def test_matches_recount(pairs):
    pred, true = zip(*pairs)
    m = score(pred, true)
    assert m.confusion == confusion(pred, true)
    if m.f1 is not None:
        assert abs(m.f1 * (m.precision + m.tpr) - 2 * m.precision * m.tpr) <= 1e-12


def test_positive_class_is_malicious():
    m = score([1, 0, 0], [1, 1, 0])
    assert (m.tp, m.fn, m.tn, m.fp) == (1, 1, 1, 0)


def test_compare_report_layout():
    ours = Metrics(tp=99, fp=1, tn=99, fn=1)
    lines = compare_report(ours).splitlines()
    assert lines[0] == "Method,TPR,FPR,Precision,Accuracy,F1Score"
    assert lines[1] == "Proposed Method,0.99,0.01,0.99,0.99,0.99"
    assert lines[2] == "Forta,0.59,N/A,0.88,N/A,N/A"
    assert compare_report(ours, baselines=[]).splitlines()[1:] == [lines[1]]
    assert FORTA_BASELINE["fpr"] is None


def _explanation(values):
    entries = [ExplanationEntry(f"F{i}", 1, MALICIOUS_CLASS if v > 0 else LEGITIMATE_CLASS, abs(v), v)
               for i, v in enumerate(values)]
    return Explanation("id", 1, entries, 0.0)


def test_chart_signs(tmp_path):
    figure2 = [0.25, 0.21, 0.21, -0.19, -0.18, 0.16, 0.10, 0.03, 0.03, 0.03]
    svg_path, csv_path = emit_contribution_chart(_explanation(figure2), tmp_path / "c.svg", title="t")
    root = ET.parse(svg_path).getroot()
    bars = [r for r in root.iter("{http://www.w3.org/2000/svg}rect") if r.find("{http://www.w3.org/2000/svg}title") is not None]
    assert len(bars) == 10
    axis = float(next(root.iter("{http://www.w3.org/2000/svg}line")).get("y1"))
    for bar, v in zip(bars, figure2):
        y, h = float(bar.get("y")), float(bar.get("height"))
        assert (y + h <= axis + 1e-6) if v > 0 else (y >= axis - 1e-6)
    rows = open(csv_path).read().splitlines()
    assert rows[0] == "feature,signed_contribution" and rows[4] == "F3,-0.19"


def test_chart_edge_cases(tmp_path):
    ET.fromstring(contribution_svg(_explanation([0.0, 0.0])))
    svg, _ = emit_contribution_chart(_explanation([0.4]), tmp_path / "one.svg")
    root = ET.parse(svg).getroot()
    assert sum(1 for r in root.iter("{http://www.w3.org/2000/svg}rect") if r.find("{http://www.w3.org/2000/svg}title") is not None) == 1
