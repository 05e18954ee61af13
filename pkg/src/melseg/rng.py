"""Counter-style random streams keyed by structured identifiers.

Every stochastic quantity in the pipeline draws from a generator derived
from ``(seed, *key)`` so results never depend on evaluation order or on
how work is split across threads.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def text_key(s: str) -> int:
    """Stable 64-bit integer for a string (Python's ``hash`` is salted per process)."""
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")


def _word(x) -> int:
    if isinstance(x, str):
        return text_key(x)
    return int(x) & _MASK64


def keyed_rng(seed: int, *key) -> np.random.Generator:
    """Generator for the stream identified by ``seed`` and ``key`` (ints or strings)."""
    ss = np.random.SeedSequence(entropy=_word(seed), spawn_key=tuple(_word(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key) -> int:
    """A 63-bit child seed, for handing to components that take a plain integer."""
    return int(keyed_rng(seed, *key).integers(0, 2**63 - 1))
