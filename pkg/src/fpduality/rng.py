"""Counter-based random streams (philox 4x32, 10 rounds).

Every random number consumed by the Monte Carlo engine is a pure function
of (seed, path index, step index).  That is the whole point: ensembles are
reproducible bit for bit no matter how paths are scheduled across workers,
and the compiled kernel and the pure-python reference path can be compared
exactly.  numpy's Generator API cannot address draws that way, hence the
hand-rolled block function.  The implementation is validated against the
three published Random123 known-answer vectors in the test suite.

One 4x32 block is consumed per time step and unpacked as

* words 0,1 -> 53-bit uniform in (0, 1]   (normal magnitude, Box-Muller)
* word  2   -> 32-bit uniform in (0, 1)   (Box-Muller angle)
* word  3   -> 32-bit uniform in (0, 1)   (boundary-bridge test)

The 32-bit granularity (about 2.3e-10) on the angle and the bridge test is
far below every tolerance used in this package.
"""

import hashlib
import math

import numpy as np

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9  # Weyl key increments
PHILOX_W1 = 0xBB67AE85

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF
_INV53 = 2.0 ** -53
_INV32 = 2.0 ** -32
TWO_PI = 2.0 * math.pi


def philox4x32_block(counter, key):
    """Run one philox4x32-10 block in pure python.

    Parameters
    ----------
    counter : tuple of four ints, each in [0, 2^32)
    key : tuple of two ints, each in [0, 2^32)

    Returns
    -------
    tuple of four ints (the output words, each in [0, 2^32))
    """
    # int() so numpy integer inputs do exact python arithmetic rather
    # than wrapping in their own fixed-width type
    c0, c1, c2, c3 = (int(c) & _MASK32 for c in counter)
    k0 = int(key[0]) & _MASK32
    k1 = int(key[1]) & _MASK32
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0 = ((p1 >> 32) & _MASK32) ^ c1 ^ k0
        c1 = p1 & _MASK32
        c2 = ((p0 >> 32) & _MASK32) ^ c3 ^ k1
        c3 = p0 & _MASK32
        k0 = (k0 + PHILOX_W0) & _MASK32
        k1 = (k1 + PHILOX_W1) & _MASK32
    return c0, c1, c2, c3


def philox4x32(counters, key):
    """Vectorized philox4x32-10 over a batch of counters.

    Parameters
    ----------
    counters : uint32 array of shape (4,) or (4, n)
    key : pair of uint32 (scalar key shared by the whole batch)

    Returns
    -------
    uint32 array with the same shape as `counters`
    """
    c = np.asarray(counters, dtype=np.uint64)
    single = c.ndim == 1
    if single:
        c = c[:, None]
    c0, c1, c2, c3 = c[0].copy(), c[1].copy(), c[2].copy(), c[3].copy()
    k0 = np.uint64(int(key[0]))
    k1 = np.uint64(int(key[1]))
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    w0 = np.uint64(PHILOX_W0)
    w1 = np.uint64(PHILOX_W1)
    mask = np.uint64(_MASK32)
    thirty_two = np.uint64(32)
    for _ in range(10):
        p0 = m0 * c0
        p1 = m1 * c2
        c0 = ((p1 >> thirty_two) & mask) ^ c1 ^ k0
        c1 = p1 & mask
        c2 = ((p0 >> thirty_two) & mask) ^ c3 ^ k1
        c3 = p0 & mask
        k0 = (k0 + w0) & mask
        k1 = (k1 + w1) & mask
    out = np.stack([c0, c1, c2, c3]).astype(np.uint32)
    return out[:, 0] if single else out


def uniform53(hi, lo):
    """Map two 32-bit words to a double in (0, 1] with 53-bit resolution."""
    word = ((hi << 32) | lo) & _MASK64
    return ((word >> 11) + 1) * _INV53


def step_draws(seed, path_index, step_index):
    """Draws consumed by one Euler-Maruyama step of one path.

    Returns ``(z, u_bridge)`` where z is a standard normal increment and
    u_bridge is the uniform used by the crossing test.  Must stay in exact
    bitwise agreement with the compiled kernel in ``_kernels``; the test
    suite enforces that.
    """
    counter = (
        step_index & _MASK32,
        (step_index >> 32) & _MASK32,
        path_index & _MASK32,
        (path_index >> 32) & _MASK32,
    )
    key = (seed & _MASK32, (seed >> 32) & _MASK32)
    o0, o1, o2, o3 = philox4x32_block(counter, key)
    u1 = uniform53(o0, o1)
    u2 = (o2 + 0.5) * _INV32
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
    u_bridge = (o3 + 0.5) * _INV32
    return z, u_bridge


def derive_stream_seed(seed, label):
    """Derive a 64-bit sub-stream seed from a base seed and a text label.

    Uses sha256 rather than hash() because the latter is salted per
    process.  Used to give the two drift signs of a duality experiment
    independent, reproducible streams.
    """
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
