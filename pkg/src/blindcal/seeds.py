"""Deterministic seed derivation for sweep runs.

A sweep over (length, trial) cells must give every cell an independent RNG
stream while staying reproducible from the single root seed.  Child seeds are
derived with splitmix64-style mixing:

    child = mix64(root XOR mix64(index_0 + 1) XOR mix64(index_1 + 2) ...)

where ``mix64`` is the splitmix64 finalizer.  The ``+ k`` offsets keep
different index positions from colliding (so (a, b) and (b, a) differ).
All arithmetic is modulo 2**64.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 finalizer round; maps 64-bit ints to 64-bit ints."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def child_seed(root: int, *indices: int) -> int:
    """Derive the child seed for one sweep cell from the root seed."""
    acc = root & _MASK64
    for pos, idx in enumerate(indices):
        acc ^= splitmix64((idx + pos + 1) & _MASK64)
    return splitmix64(acc)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a (possibly child) seed."""
    return np.random.Generator(np.random.PCG64(seed & _MASK64))
