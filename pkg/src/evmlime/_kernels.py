"""Select the compiled kernels when built, else the numpy fallback.

Set ``EVMLIME_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("EVMLIME_PURE_PYTHON"):
    from evmlime._core_py import knn_positive_counts, scan_boundaries, sweep_histogram, sweep_offsets

    BACKEND = "python"
else:
    try:
        from evmlime._core import knn_positive_counts, scan_boundaries, sweep_histogram, sweep_offsets

        BACKEND = "cython"
    except ImportError:
        from evmlime._core_py import knn_positive_counts, scan_boundaries, sweep_histogram, sweep_offsets

        BACKEND = "python"

__all__ = ["BACKEND", "knn_positive_counts", "scan_boundaries", "sweep_histogram", "sweep_offsets"]
