"""
pycorv.rng - Per-chain random streams

Each chain owns one counter-based Philox stream keyed by its integer seed, so
a chain's draws never depend on how many other chains ran before it or on
which worker process it landed.
"""

import math
from collections import Counter
from typing import List, Sequence

import numpy as np

from .errors import ConfigError


def chain_stream(seed: int) -> np.random.Generator:
    """Seeded Philox stream for one chain."""
    if int(seed) < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))


def draw_normal(rng: np.random.Generator, like):
    """One standard normal per element of `like`; a float when it is scalar."""
    if np.ndim(like) == 0:
        return rng.standard_normal()
    return rng.standard_normal(np.shape(like))


def replicate_seeds(base_seed: int, n: int) -> List[int]:
    """Distinct consecutive seeds for `n` replicate chains."""
    return [int(base_seed) + k for k in range(n)]


def check_distinct(seeds: Sequence[int]) -> None:
    dupes = sorted(s for s, count in Counter(seeds).items() if count > 1)
    if dupes:
        raise ConfigError("duplicate chain seeds", [f"seeds: {s} used more than once" for s in dupes])


# Auxiliary streams keyed by role, disjoint from every chain_stream(seed).
STREAM_ROLES = {"data": 1, "reference": 2}


def substream(seed: int, role: str) -> np.random.Generator:
    """Philox stream for a non-chain role ("data" or "reference") under `seed`."""
    if int(seed) < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    if role not in STREAM_ROLES:
        raise ConfigError(f"unknown stream role {role!r}; expected one of {', '.join(STREAM_ROLES)}")
    seq = np.random.SeedSequence(int(seed), spawn_key=(STREAM_ROLES[role],))
    return np.random.Generator(np.random.Philox(seq))


class CoarseNormals:
    """Normal draws for a chain of stepsize refine*eps, coupled to a stepsize-eps chain.

    Each draw is the scaled sum of the next `refine` draws that the fine chain
    would take from `rng` under the same seed, so both chains follow one
    Brownian path. Only the eta draws of an exact-gradient chain line up.
    """

    def __init__(self, rng: np.random.Generator, refine: int):
        if refine < 1:
            raise ConfigError(f"refine must be >= 1, got {refine}")
        self.rng = rng
        self.refine = int(refine)

    def standard_normal(self, size=None):
        shape = () if size is None else tuple(np.atleast_1d(size).tolist())
        total = self.rng.standard_normal((self.refine,) + shape).sum(axis=0) / math.sqrt(self.refine)
        return float(total) if size is None else total
