"""Counter-based random numbers and seed derivation.

Every Gaussian used by the potential is a pure function of a 128-bit counter
and the 64-bit master seed (Philox-4x32-10, Salmon et al.), so values never
depend on evaluation order and need no shared generator state.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)

_MASK64 = 0xFFFFFFFFFFFFFFFF


def philox4x32(c0, c1, c2, c3, k0, k1, rounds: int = 10):
    """Vectorized Philox-4x32; all arguments broadcast, values are 32-bit words."""
    c0, c1, c2, c3, k0, k1 = (np.asarray(v, dtype=np.uint64) & MASK32
                              for v in (c0, c1, c2, c3, k0, k1))
    for round_index in range(rounds):
        if round_index:
            k0 = (k0 + PHILOX_W0) & MASK32
            k1 = (k1 + PHILOX_W1) & MASK32
        product0 = PHILOX_M0 * c0
        product1 = PHILOX_M1 * c2
        hi0, lo0 = product0 >> SHIFT32, product0 & MASK32
        hi1, lo1 = product1 >> SHIFT32, product1 & MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def keyed_uniform(seed, c0, c1, c2, c3) -> np.ndarray:
    """Uniform doubles strictly inside (0, 1), 53 bits, one per counter."""
    seed = np.asarray(seed, dtype=np.uint64)
    r0, r1, _, _ = philox4x32(c0, c1, c2, c3, seed & MASK32, seed >> SHIFT32)
    mantissa = (r0 >> np.uint64(5)) * np.uint64(1 << 26) + (r1 >> np.uint64(6))
    return (mantissa.astype(np.float64) + 0.5) / float(1 << 53)


def keyed_normal(seed, c0, c1, c2, c3) -> np.ndarray:
    """Standard normals by inverse CDF of `keyed_uniform`."""
    return ndtri(keyed_uniform(seed, c0, c1, c2, c3))


def splitmix64(value: int) -> int:
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def replicate_seed(master_seed: int, system_size: int, replicate: int, stream: int = 0) -> int:
    """Seed of one replicate: splitmix64 folded over (master, L, replicate, stream).

    Depends only on its own coordinates, so growing the replicate count never
    changes the seeds of existing replicates.
    """
    state = splitmix64(master_seed & _MASK64)
    for word in (system_size, replicate, stream):
        state = splitmix64(state ^ (word & _MASK64))
    return state
