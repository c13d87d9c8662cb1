"""Counter-addressable random streams for reproducible parallel ensembles.

Every trajectory owns a virtual stream of standard-normal pairs. The pair
with index ``c`` in trajectory ``j``'s stream is a pure function of
``(seed, j, c)``: two 64-bit words are produced by a splitmix64-style
counter hash and turned into a normal pair by Box-Muller. Because no
generator state exists, the realized noise cannot depend on how
trajectories are partitioned over workers, how draws are batched, or in
which order threads run. This is what makes ensemble evolution bit-exact
under any parallel schedule.

Consumption is in lockstep: all trajectories of an ensemble consume the
same number of pairs (one per integration step per mode, one per
heterodyne reset), so a single pair counter per ensemble suffices.

The scalar helpers (`mix64`, `rng64`, `normal_pair`) are numba-jitted and
inlined into the hot integration kernels; `normal_block` is a vectorized
numpy path used for ensemble initialization and measurement resets. Both
paths read the same counters but are never applied to the same counter
value, so each event type is reproducible on its own.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "derive_keys",
    "protocol_key",
    "mix64",
    "rng64",
    "normal_pair",
    "normal_block",
    "protocol_uniform",
]

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_KEY_TAG = np.uint64(0xD1B54A32D192ED03)
_PROTOCOL_TAG = np.uint64(0x8CB92BA72F3D8DD7)
_INV53 = 2.0 ** -53
_TWO_PI = 6.283185307179586


@njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def rng64(key, n):
    # Mixing the counter before adding the key breaks any arithmetic
    # alignment between streams: distinct keys cannot share a shifted
    # subsequence beyond single-word coincidences.
    return mix64(key + mix64(n * _GOLD + _GOLD))


@njit(inline="always")
def normal_pair(key, c):
    """Standard-normal pair with index ``c`` of stream ``key``."""
    a = rng64(key, np.uint64(2 * c))
    b = rng64(key, np.uint64(2 * c) + np.uint64(1))
    # u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    u1 = (np.float64(a >> np.uint64(11)) + 1.0) * _INV53
    u2 = np.float64(b >> np.uint64(11)) * _INV53
    r = np.sqrt(-2.0 * np.log(u1))
    ph = _TWO_PI * u2
    return r * np.cos(ph), r * np.sin(ph)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    # uint64 wraparound is the point; silence numpy's scalar-overflow warning
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _rng64_np(keys: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix64_np(keys + _mix64_np(n * _GOLD + _GOLD))


def derive_keys(seed: int, n_traj: int) -> np.ndarray:
    """Per-trajectory stream keys derived from a 64-bit master seed."""
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    idx = np.arange(n_traj, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_np(_mix64_np(s + _GOLD) + (idx + np.uint64(1)) * _KEY_TAG)


def protocol_key(seed: int) -> np.uint64:
    """Key of the protocol-level stream (measurement outcome sampling)."""
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return np.uint64(_mix64_np(_mix64_np(s + _GOLD) ^ _PROTOCOL_TAG))


def protocol_uniform(key: np.uint64, counter: int) -> float:
    """Uniform [0, 1) draw with index ``counter`` from the protocol stream."""
    w = _rng64_np(np.uint64(key), np.uint64(counter))
    return float(w >> np.uint64(11)) * _INV53


def normal_block(keys: np.ndarray, counter: int, n_pairs: int) -> np.ndarray:
    """Normals for all streams, shape ``(len(keys), 2 * n_pairs)``.

    Column ``2c`` / ``2c + 1`` holds the pair with index ``counter + c``.
    Vectorized numpy path; statistically and positionally equivalent to
    drawing `normal_pair` in a loop (same hash words, same Box-Muller).
    """
    c = np.uint64(counter) + np.arange(n_pairs, dtype=np.uint64)
    word_idx = np.empty(2 * n_pairs, dtype=np.uint64)
    word_idx[0::2] = np.uint64(2) * c
    word_idx[1::2] = np.uint64(2) * c + np.uint64(1)
    words = _rng64_np(keys[:, None], word_idx[None, :])
    u1 = ((words[:, 0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53
    u2 = (words[:, 1::2] >> np.uint64(11)).astype(np.float64) * _INV53
    r = np.sqrt(-2.0 * np.log(u1))
    ph = _TWO_PI * u2
    out = np.empty((len(keys), 2 * n_pairs))
    out[:, 0::2] = r * np.cos(ph)
    out[:, 1::2] = r * np.sin(ph)
    return out
