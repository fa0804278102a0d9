"""Seeded 64-bit hash used by the local hashing oracles."""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z):
    """SplitMix64 finalizer (bijective avalanche on uint64), elementwise."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def lh_hash(seed, value, g):
    """Bucket of ``value`` under the hash function indexed by ``seed``.

    Broadcasts over ``seed`` and ``value``; returns int64 buckets in [0, g).
    """
    seed = np.asarray(seed, dtype=np.uint64)
    value = np.asarray(value).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = seed ^ ((value + np.uint64(1)) * _GOLDEN)
    return (mix64(z) % np.uint64(g)).astype(np.int64)
