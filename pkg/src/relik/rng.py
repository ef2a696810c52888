"""Counter-based random streams.

Every random draw is a pure function of ``(key, counter)``, so a stream for
one work item can be regenerated in isolation or evaluated in bulk for many
items at once without the results depending on batch composition, chunking
or thread scheduling.

The mixer is SplitMix64 (Steele, Lea & Flood 2014): ``z += 0x9E3779B97F4A7C15``
followed by two xor-shift-multiply rounds.  Keys for derived streams are
built by folding each path component into the parent key with the same
mixer::

    key(seed, a, b, ...) = mix(... mix(mix(seed) ^ a) ^ b ...)
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1

# Side tags used when deriving per-triple streams.
HEAD_TAG = 1
TAIL_TAG = 2


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Apply the SplitMix64 output function elementwise (uint64, wrapping)."""
    z = np.asarray(x, dtype=np.uint64) + GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _mix_int(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(seed: int, *path: int) -> int:
    """Fold ``path`` into ``seed`` and return a 64-bit stream key."""
    key = _mix_int(seed & _MASK)
    for part in path:
        key = _mix_int(key ^ (part & _MASK))
    return key


def derive_keys(seed: int, indices: np.ndarray, tag: int) -> np.ndarray:
    """Vectorised ``derive_key(seed, i, tag)`` for each ``i`` in ``indices``."""
    base = np.uint64(_mix_int(seed & _MASK))
    idx = np.asarray(indices, dtype=np.int64).astype(np.uint64)
    k = splitmix64(base ^ idx)
    return splitmix64(k ^ np.uint64(tag & _MASK))


def draws(keys: np.ndarray, start: int, count: int) -> np.ndarray:
    """Return the ``count`` raw 64-bit draws starting at ``start`` for each key.

    ``keys`` of shape (B,) gives an array of shape (B, count).
    """
    keys = np.asarray(keys, dtype=np.uint64).reshape(-1, 1)
    ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64) * GOLDEN
    return splitmix64(keys + ctr[None, :])


def uniform_below(raw: np.ndarray, n) -> np.ndarray:
    """Map raw draws to integers in ``[0, n)``; bias is at most n / 2**64."""
    return (raw % np.asarray(n, dtype=np.uint64)).astype(np.int64)


def numpy_generator(seed: int, *path: int) -> np.random.Generator:
    """A sequential numpy Generator for a derived stream.

    Used where draws are inherently sequential (walks, training loops).
    """
    return np.random.default_rng(derive_key(seed, *path))
