"""Deterministic seed derivation.

All randomness in the pipeline flows from a single 64-bit master seed.
Sub-seeds are derived by hashing the master seed together with a path of
string/integer parts (e.g. ``("fold-shuffle", repeat, class_name)``), so
independent units of work (folds, trees, permutations) get independent,
reproducible streams regardless of execution order.  SHA-256 is used
because it is stable across platforms and Python versions, unlike the
builtin ``hash``.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(master_seed: int, *parts: object) -> int:
    """Derive a 64-bit sub-seed from a master seed and a label path."""
    h = hashlib.sha256()
    h.update(b"hemascreen")
    h.update(_SEP)
    h.update(str(int(master_seed)).encode())
    for part in parts:
        h.update(_SEP)
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(master_seed: int, *parts: object) -> np.random.Generator:
    """A numpy Generator seeded by :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master_seed, *parts))
