"""Planted-signal opcode-frequency corpus for offline end-to-end checks.

Legitimate contracts draw every opcode count from a Poisson whose rate is
the product of a per-opcode base rate and a per-contract size factor.
Malicious contracts do the same but with the planted opcodes' rates
multiplied by ``boost``. Nothing else differs between the classes.
"""

from __future__ import annotations

import numpy as np

from evmlime.dataset import Dataset
from evmlime.disasm import VOCABULARY

PLANTED = ("SSTORE", "RETURNDATACOPY", "SLT", "EQ", "OR", "RETURN", "DELEGATECALL", "LOG", "SUB", "SLOAD")


def planted_corpus(n_legit: int = 2000, n_malicious: int = 100, planted=PLANTED, boost: float = 4.0,
                   seed: int = 20240501) -> Dataset:
    rng = np.random.default_rng(seed)
    d = len(VOCABULARY)
    base = rng.lognormal(mean=1.5, sigma=1.0, size=d)
    base[VOCABULARY.index("PUSH")] *= 8
    base[VOCABULARY.index("DUP")] *= 4
    base[VOCABULARY.index("SWAP")] *= 4
    planted_idx = [VOCABULARY.index(p) for p in planted]

    def draw(n, multiplier):
        size = rng.lognormal(mean=0.0, sigma=0.25, size=(n, 1))
        return rng.poisson(size * base * multiplier)

    mult = np.ones(d)
    mult[planted_idx] = boost
    X = np.vstack([draw(n_legit, np.ones(d)), draw(n_malicious, mult)])
    y = np.concatenate([np.zeros(n_legit, dtype=np.int64), np.ones(n_malicious, dtype=np.int64)])
    ids = tuple(f"legit-{i:05d}" for i in range(n_legit)) + tuple(f"mal-{i:05d}" for i in range(n_malicious))
    return Dataset(ids, X, y, VOCABULARY)
