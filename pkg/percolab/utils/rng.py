"""Counter-based uniform streams.

A draw is a pure function of (stream key, counter): the key comes from hashing a
SeedSpec, the counter is a packed edge code. Nothing is sequential, so results do
not depend on iteration order, region size or worker count.

The mixer is splitmix64 applied twice; the scalar and vectorized paths are
bit-identical.
"""

import hashlib

import numpy as np

from percolab.schemas.seeds import SeedSpec

MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TO_UNIT = 2.0**-53


def derive_key(seed: SeedSpec) -> int:
    """64-bit stream key; the purpose tag is hashed in for domain separation."""
    material = f"percolab|{seed.master_seed}|{seed.replica_index}|{seed.purpose_tag}"
    digest = hashlib.blake2b(material.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _mix(z: int) -> int:
    z = (z + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def uniform_scalar(key: int, counter: int) -> float:
    """Uniform draw in [0, 1) with 53-bit resolution."""
    return (_mix(key ^ _mix(counter)) >> 11) * _TO_UNIT


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform_array(keys: int | np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Vectorized uniform_scalar.

    `keys` is a single key or an array broadcastable against `counters`, e.g. shape
    (replicas, 1) against (edges,) for a whole batch of replicas at once.
    """
    counters = np.atleast_1d(np.asarray(counters, dtype=np.uint64))
    keys = np.asarray(keys, dtype=np.uint64)
    mixed = _mix_array(keys ^ _mix_array(counters))
    return (mixed >> np.uint64(11)).astype(np.float64) * _TO_UNIT
