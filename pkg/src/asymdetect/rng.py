"""Deterministic seed derivation.

All randomness flows from 64-bit master seeds through numpy's PCG64 bit
generator, which has a fixed, platform-independent stream. Sub-streams are
derived by hashing ``(master, namespace, key)`` triples with
``numpy.random.SeedSequence`` so that the graph, source choice, beta choice,
transmission draws, and observation draws of one instance can each be
re-randomized independently, and so that dataset instances use disjoint
streams.
"""

from __future__ import annotations

import numpy as np

# Namespaces keep per-role and per-instance derivations collision-free.
_ROLE_NS = 1
_INSTANCE_NS = 2

ROLES = {
    "graph": 0,
    "source": 1,
    "beta": 2,
    "epidemic": 3,
    "observation": 4,
    "split": 5,
    "init": 6,
    "shuffle": 7,
}


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def role_seed(master: int, role: str) -> int:
    """Derive the 64-bit sub-seed for one named role of a master seed."""
    ss = np.random.SeedSequence([check_seed(master), _ROLE_NS, ROLES[role]])
    return int(ss.generate_state(1, np.uint64)[0])


def instance_seed(master: int, index: int) -> int:
    """Derive the 64-bit master seed of dataset instance `index`."""
    if index < 0:
        raise ValueError("instance index must be non-negative")
    ss = np.random.SeedSequence([check_seed(master), _INSTANCE_NS, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def generator(seed: int) -> np.random.Generator:
    """PCG64 generator for a (possibly derived) 64-bit seed."""
    return np.random.Generator(np.random.PCG64(check_seed(seed)))
