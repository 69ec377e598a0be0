"""Pure-Python/numpy versions of the compiled kernels in ``_core.pyx``."""

import numpy as np


def sweep_histogram(code):
    counts = np.zeros(256, dtype=np.int64)
    i, n = 0, len(code)
    while i < n:
        op = code[i]
        counts[op] += 1
        i += op - 0x5E if 0x60 <= op <= 0x7F else 1
    return counts


def sweep_offsets(code):
    out = []
    i, n = 0, len(code)
    while i < n:
        out.append(i)
        op = code[i]
        i += op - 0x5E if 0x60 <= op <= 0x7F else 1
    return np.asarray(out, dtype=np.int64)


def _entropy_rows(counts, sizes):
    # counts: (m, k); rows with size 0 contribute 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / sizes[:, None]
        terms = np.where(counts > 0, p * np.log2(np.where(counts > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def scan_boundaries(values, codes, n_classes):
    values = np.asarray(values, dtype=np.float64)
    codes = np.asarray(codes, dtype=np.int64)
    n = len(values)
    if n < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    positions = np.flatnonzero(values[1:] != values[:-1]).astype(np.int64)
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), codes] = 1
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    left = cum[positions]
    right = total[None, :] - left
    n_left = (positions + 1).astype(np.float64)
    n_right = n - n_left
    h_total = _entropy_rows(total[None, :], np.array([float(n)]))[0]
    gains = (h_total - (n_left / n) * _entropy_rows(left, n_left)
             - (n_right / n) * _entropy_rows(right, n_right))
    return positions, gains


def knn_positive_counts(train, labels, queries, k):
    train = np.asarray(train, dtype=np.uint64)
    queries = np.asarray(queries, dtype=np.uint64)
    labels = np.asarray(labels, dtype=np.int64)
    n = train.shape[0]
    index = np.arange(n, dtype=np.int64)
    out = np.empty(len(queries), dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, n * train.shape[1]))
    for start in range(0, len(queries), chunk):
        block = queries[start:start + chunk]
        dist = np.bitwise_count(block[:, None, :] ^ train[None, :, :]).sum(axis=2, dtype=np.int64)
        # unique keys: distance first, training index second
        keys = dist * n + index[None, :]
        nearest = np.argpartition(keys, k - 1, axis=1)[:, :k]
        out[start:start + chunk] = labels[nearest].sum(axis=1)
    return out
