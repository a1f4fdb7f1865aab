"""Counter-based random numbers: a stateless SplitMix64 stream.

Every draw is a pure function of (key, counter), so results never depend on
evaluation order, threading, or chunking.  Keys for replicas and named
sub-streams are derived by remixing, exactly as documented here; tests rely
on these derivations staying fixed.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z):
    """SplitMix64 finalizer, elementwise over uint64 scalars or arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):  # wraparound is the point
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def key_from_seed(seed: int) -> np.uint64:
    return np.uint64(mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


def derive_key(key, index: int) -> np.uint64:
    """Independent sub-stream key #index of a parent key."""
    return np.uint64(mix64(np.uint64(key) ^ (np.uint64(index + 1) * GOLDEN)))


def uniforms(key, counters):
    """U[0,1) doubles addressed by counter; counters may be any uint64 array."""
    with np.errstate(over="ignore"):
        z = mix64(np.asarray(counters, dtype=np.uint64) * GOLDEN + np.uint64(key))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def site_hash_sign(key, x: int, y: int, p: float) -> int:
    """Deterministic +-1 draw attached to a lattice site (P[+1] = p)."""
    ux = np.uint64((x + (1 << 31)) & 0xFFFFFFFF)
    uy = np.uint64((y + (1 << 31)) & 0xFFFFFFFF)
    ctr = (ux << np.uint64(32)) | uy
    return 1 if float(uniforms(key, ctr)) < p else -1
