"""Counter-based random streams usable from compiled kernels.

Every path draws from its own Philox4x32-10 stream.  The key is the 64-bit
run seed; the counter carries (draw index, path id, stream tag), so the
numbers seen by path ``i`` do not depend on how paths are split across
workers or on how many draws other paths consumed.
"""

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

# stream tags; one per consumer so streams never overlap
TAG_DIFFUSION = 0
TAG_MODEL = 1
TAG_CORNER = 2
TAG_BRIDGE = 3
TAG_SAMPLER = 4
TAG_PAIRS = 5


@nb.njit(nogil=True, cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 block; all arguments are uint64 holding 32-bit words."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


@nb.njit(nogil=True, cache=True)
def normal_pair(draw, path, tag, k0, k1):
    """Two independent N(0,1) variates for counter ``draw`` of stream (path, tag)."""
    d = np.uint64(draw)
    c0, c1, c2, c3 = philox4x32(
        d & _MASK32, d >> _S32, np.uint64(path) & _MASK32, np.uint64(tag), k0, k1
    )
    a = ((c0 << _S32) | c1) >> _S11
    b = ((c2 << _S32) | c3) >> _S11
    u1 = (float(a) + 0.5) * _TWO_M53
    u2 = float(b) * _TWO_M53
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


@nb.njit(nogil=True, cache=True)
def uniform_pair(draw, path, tag, k0, k1):
    d = np.uint64(draw)
    c0, c1, c2, c3 = philox4x32(
        d & _MASK32, d >> _S32, np.uint64(path) & _MASK32, np.uint64(tag), k0, k1
    )
    a = ((c0 << _S32) | c1) >> _S11
    b = ((c2 << _S32) | c3) >> _S11
    return float(a) * _TWO_M53, float(b) * _TWO_M53


def split_seed(seed):
    """Return the two 32-bit key words of a 64-bit seed as uint64."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def generator(seed, tag, index=0):
    """A NumPy Generator on its own Philox stream, for vectorised host-side draws."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=[seed, (int(tag) << 40) | int(index)]))


@nb.njit(nogil=True, cache=True)
def _normals_kernel(out, path0, tag, k0, k1):
    n_paths, m = out.shape
    for p in range(n_paths):
        draw = 0
        j = 0
        while j < m:
            z1, z2 = normal_pair(draw, path0 + p, tag, k0, k1)
            draw += 1
            out[p, j] = z1
            if j + 1 < m:
                out[p, j + 1] = z2
            j += 2


def path_normals(seed, n_paths, m, tag=TAG_SAMPLER, path0=0):
    """``(n_paths, m)`` standard normals; row ``p`` is path ``path0 + p``'s stream."""
    k0, k1 = split_seed(seed)
    out = np.empty((n_paths, m))
    _normals_kernel(out, path0, tag, k0, k1)
    return out
