"""Counter-based random numbers (Philox-4x32-10).

Every draw is a pure function of a 64-bit key and a 128-bit counter, so
samples can be generated for any cell, replica or time step in any order
without carrying generator state around.  The block function is compiled
with numba and is called from the other kernels in this package.
"""

import numpy as np
from numba import njit

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SHIFT = np.uint64(32)
_TWO_M53 = 1.0 / 9007199254740992.0

# domain tags for the fourth counter word of non-environment streams
BROWNIAN_TAG = 0x5DE0B0B0
SAMPLING_TAG = 0x5A3B1E00


@njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox-4x32-10 block.

    All arguments are uint64 holding 32-bit words.  Returns four uint64
    holding the 32-bit output words.
    """
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT
        lo0 = p0 & MASK32
        hi1 = p1 >> _SHIFT
        lo1 = p1 & MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & MASK32
        k1 = (k1 + _W1) & MASK32
    return c0, c1, c2, c3


@njit(cache=True)
def words_to_unit(a, b):
    """Uniform double in [0, 1) with 53 random bits from two 32-bit words."""
    hi = float(a >> np.uint64(5))
    lo = float(b >> np.uint64(6))
    return (hi * 67108864.0 + lo) * _TWO_M53


@njit(cache=True)
def block_uniforms(c0, c1, c2, c3, k0, k1):
    """Two uniforms in [0, 1) from one Philox block."""
    r0, r1, r2, r3 = philox4x32(c0, c1, c2, c3, k0, k1)
    return words_to_unit(r0, r1), words_to_unit(r2, r3)


@njit(cache=True)
def block_normals(c0, c1, c2, c3, k0, k1):
    """Two independent standard normals from one block (Box-Muller)."""
    u, v = block_uniforms(c0, c1, c2, c3, k0, k1)
    rad = np.sqrt(-2.0 * np.log(1.0 - u))
    ang = 2.0 * np.pi * v
    return rad * np.cos(ang), rad * np.sin(ang)


def splitmix64(x):
    """SplitMix64 finalizer on a Python int; used to derive Philox keys."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def derive_key(seed, salt=0):
    """Split a 64-bit seed (mixed with ``salt``) into two uint64 key words."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    k = splitmix64(int(seed) ^ splitmix64(int(salt)))
    return np.uint64(k & 0xFFFFFFFF), np.uint64(k >> 32)


@njit(cache=True)
def _philox_many(ctr, k0, k1, out):
    for i in range(ctr.shape[0]):
        r = philox4x32(ctr[i, 0], ctr[i, 1], ctr[i, 2], ctr[i, 3], k0, k1)
        out[i, 0] = r[0]
        out[i, 1] = r[1]
        out[i, 2] = r[2]
        out[i, 3] = r[3]


def philox_blocks(counters, key):
    """Vectorised Philox over an ``(n, 4)`` array of 32-bit counter words.

    Parameters
    ----------
    counters : array_like of int, shape (n, 4)
    key : pair of int

    Returns
    -------
    ndarray of uint64, shape (n, 4)
    """
    ctr = np.ascontiguousarray(np.asarray(counters, dtype=np.uint64).reshape(-1, 4))
    if np.any(ctr > MASK32):
        raise ValueError("counter words must fit in 32 bits")
    out = np.empty_like(ctr)
    _philox_many(ctr, np.uint64(key[0]), np.uint64(key[1]), out)
    return out


@njit(cache=True)
def _uniform_stream(n, c1, c2, c3, k0, k1, out):
    for j in range((n + 1) // 2):
        u, v = block_uniforms(np.uint64(j), c1, c2, c3, k0, k1)
        out[2 * j] = u
        if 2 * j + 1 < n:
            out[2 * j + 1] = v


def uniform_stream(seed, stream, n):
    """``n`` uniforms from the sampling stream number ``stream``.

    Used for drawing probe locations in the checking code; deterministic in
    ``(seed, stream)``.
    """
    k0, k1 = derive_key(seed, SAMPLING_TAG)
    out = np.empty(n)
    _uniform_stream(n, np.uint64(stream & 0xFFFFFFFF), np.uint64(stream >> 32),
                    np.uint64(SAMPLING_TAG), k0, k1, out)
    return out
