import json
from pathlib import Path

import numpy as np
import pytest

from evmlime import _core_py

DATA = Path(__file__).parent / "data"

_ACCEPTANCE_LINES: list[str] = []


def _backends():
    out = [pytest.param(_core_py, id="python")]
    try:
        from evmlime import _core
    except ImportError:
        out.append(pytest.param(None, id="cython", marks=pytest.mark.skip(reason="compiled core not built")))
    else:
        out.append(pytest.param(_core, id="cython"))
    return out


@pytest.fixture(params=_backends())
def backend(request):
    return request.param


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def check(number, name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# Toy corpus: 20 hex contracts, 10 legitimate, 10 malicious. Malicious ones
# carry extra DELEGATECALL/SSTORE/SUB instructions.
_LEGIT_BODY = "6080604052" + "600160020155" * 2 + "5b00"
_MAL_BODY = "6080604052" + "f4" * 3 + "55" * 4 + "03" * 5 + "00"


@pytest.fixture
def toy_contracts(tmp_path):
    rng = np.random.default_rng(7)
    bdir = tmp_path / "bytecode"
    bdir.mkdir()
    manifest = {}
    for i in range(20):
        label = int(i >= 10)
        body = _MAL_BODY if label else _LEGIT_BODY
        filler = "".join(rng.choice(["01", "02", "50", "14", "16"], size=int(rng.integers(1, 6))))
        name = f"c{i:02d}.hex"
        (bdir / name).write_text("0x" + body + filler + "\n")
        manifest[name] = label
    mpath = tmp_path / "manifest.json"
    mpath.write_text(json.dumps(manifest))
    return bdir, mpath
