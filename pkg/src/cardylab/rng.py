"""Counter-based site colors.

The color of site ``(u, v)`` in replica ``r`` under ``seed`` is one bit of a
SplitMix64-style hash of ``(seed, r, u, v)``.  Nothing is stateful, so the
result does not depend on which worker evaluates which replica, and two
domains sharing a site see the same color in the same replica (common random
numbers across nearby domains).
"""

from __future__ import annotations

import hashlib
import struct

import numba as nb
import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_S63 = np.uint64(63)
_OFF = np.uint64(1 << 31)
_LOW = np.uint64(0xFFFFFFFF)


@nb.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always")
def replica_key(seed, r):
    k = mix64(np.uint64(seed) + _GOLDEN)
    return mix64(k ^ (np.uint64(r) * _GOLDEN + _M2))


@nb.njit(inline="always")
def site_word(key, u, v):
    packed = ((np.uint64(u + 2147483648) & _LOW) << _S32) | (np.uint64(v + 2147483648) & _LOW)
    return mix64(key ^ mix64(packed + _GOLDEN))


@nb.njit(inline="always")
def site_is_blue(key, u, v):
    return (site_word(key, u, v) >> _S63) == np.uint64(1)


@nb.njit(cache=True, nogil=True)
def blue_mask(seed, r, uv):
    key = replica_key(seed, r)
    out = np.empty(uv.shape[0], dtype=np.bool_)
    for i in range(uv.shape[0]):
        out[i] = site_is_blue(key, uv[i, 0], uv[i, 1])
    return out


def colors_for(seed: int, replica: int, uv: np.ndarray) -> np.ndarray:
    """Blue mask of the given sites in one replica."""
    return blue_mask(np.uint64(seed), np.int64(replica), np.ascontiguousarray(uv, dtype=np.int64))


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


_MASK = (1 << 64) - 1


def _mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _word(part) -> int:
    if isinstance(part, bool):
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK
    if isinstance(part, (float, np.floating)):
        return struct.unpack("<Q", struct.pack("<d", float(part)))[0]
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, *parts) -> int:
    """Child seed for a named piece of an experiment (a scale, a trace, a perturbation family).

    Floats enter through their exact bit pattern, so a scale of 1/64 always
    gets the same child seed whatever other scales the run contains.
    """
    z = _mix64_int(check_seed(seed) + 0x9E3779B97F4A7C15)
    for p in parts:
        z = _mix64_int(z ^ _mix64_int(_word(p) + 0x9E3779B97F4A7C15))
    return z
