import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evmlime import _core_py, _kernels
from evmlime.classify import pack_bits

try:
    from evmlime import _core
except ImportError:  # pragma: no cover
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")


def test_backend_is_reported():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("code, offsets", [
    (b"", []),
    (bytes([0x60, 0x01]), [0]),
    (bytes([0x60, 0x01, 0x60, 0x02, 0x01]), [0, 2, 4]),
    (bytes([0x7F]) + bytes(31), [0]),
    (bytes([0x7F, 0x00]), [0]),  # truncated PUSH32
    (bytes([0x00, 0xFE, 0x0C]), [0, 1, 2]),
])
def test_sweep_offsets(backend, code, offsets):
    assert backend.sweep_offsets(code).tolist() == offsets


@needs_core
@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=300))
def test_sweep_backends_agree(code):
    assert _core.sweep_offsets(code).tolist() == _core_py.sweep_offsets(code).tolist()
    assert _core.sweep_histogram(code).tolist() == _core_py.sweep_histogram(code).tolist()


@needs_core
@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 2)), min_size=1, max_size=60))
def test_scan_boundaries_backends_agree(pairs):
    values = np.sort(np.array([float(v) for v, _ in pairs]))
    codes = np.array([c for _, c in pairs], dtype=np.int64)
    p1, g1 = _core.scan_boundaries(values, codes, 3)
    p2, g2 = _core_py.scan_boundaries(values, codes, 3)
    assert p1.tolist() == p2.tolist()
    np.testing.assert_allclose(g1, g2, rtol=0, atol=1e-12)


@needs_core
@pytest.mark.parametrize("d", [1, 7, 64, 70])
def test_knn_backends_agree(d):
    rng = np.random.default_rng(d)
    X = rng.integers(0, 2, (150, d))
    y = rng.integers(0, 2, 150).astype(np.uint8)
    Q = rng.integers(0, 2, (40, d))
    for k in (1, 3, 5, 149):
        a = _core.knn_positive_counts(pack_bits(X), y, pack_bits(Q), k)
        b = _core_py.knn_positive_counts(pack_bits(X), y, pack_bits(Q), k)
        assert a.tolist() == b.tolist()
