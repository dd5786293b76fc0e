"""Counter-based random streams (Philox4x64-10) usable inside numba kernels.

Every particle owns a stream keyed by ``(seed, particle_index)``; the block
counter advances only within that particle, so draws never depend on how
particles are scheduled across threads. The block function is bit-compatible
with :class:`numpy.random.Philox`.
"""

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _MASK32) + lo_hi
    hi = hi_hi + (hi_lo >> _S32) + (cross >> _S32)
    return hi, a * b


@nb.njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block for counter ``(c0..c3)`` and key ``(k0, k1)``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def to_unit(x):
    """Map a 64-bit word to a double in the open interval (0, 1)."""
    return ((x >> _S11) + 0.5) * _TWO_M53


@nb.njit(cache=True)
def uniforms4(seed, stream, counter):
    """Four open-interval uniforms from block ``counter`` of a stream."""
    a, b, c, d = philox_block(np.uint64(counter), np.uint64(0), np.uint64(0),
                              np.uint64(0), np.uint64(seed), np.uint64(stream))
    return to_unit(a), to_unit(b), to_unit(c), to_unit(d)


@nb.njit(cache=True, inline="always")
def box_muller(u1, u2):
    r = math.sqrt(-2.0 * math.log(u1))
    t = 2.0 * math.pi * u2
    return r * math.cos(t), r * math.sin(t)


def stream_generator(seed, stream):
    """A numpy Generator keyed like the kernel stream for host-side draws.

    The second counter word is set to 1, so host blocks never coincide with
    the blocks consumed inside kernels (which keep that word at 0).
    """
    key = [int(seed) & (2**64 - 1), int(stream) & (2**64 - 1)]
    return np.random.Generator(np.random.Philox(counter=[0, 1, 0, 0], key=key))
