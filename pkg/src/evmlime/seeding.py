"""Stage-specific random streams derived from one root seed."""

import zlib

import numpy as np


def stage_seed(seed: int, stage: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(stage.encode()),))


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Independent generator per (seed, stage); reseeding one stage leaves others untouched."""
    return np.random.default_rng(stage_seed(seed, stage))


def child_rng(seed: int, stage: str, index: int) -> np.random.Generator:
    ss = stage_seed(seed, stage)
    return np.random.default_rng(np.random.SeedSequence(entropy=ss.entropy, spawn_key=ss.spawn_key + (int(index),)))
