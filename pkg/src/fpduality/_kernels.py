"""Compiled Monte Carlo kernel.

Kept in its own module so that importing the package (or running the
analytic/numeric parts) never triggers numba compilation, and so the CLI
can configure the thread pool before numba is first imported.

The philox block here must stay in exact bitwise agreement with
fpduality.rng.step_draws; the test suite compares the two path by path.
Do not "simplify" floating-point expressions in one place only.
"""

import math

import numpy as np
from numba import njit, prange

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 2.0 ** -53
_INV32 = 2.0 ** -32
_TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def _step_draws(step, path, k0_init, k1_init):
    """Normal increment and bridge uniform for (step, path); see rng.step_draws."""
    c0 = step & _MASK
    c1 = (step >> _SH32) & _MASK
    c2 = path & _MASK
    c3 = (path >> _SH32) & _MASK
    k0 = k0_init
    k1 = k1_init
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _SH32) & _MASK) ^ c1 ^ k0
        n1 = p1 & _MASK
        n2 = ((p0 >> _SH32) & _MASK) ^ c3 ^ k1
        n3 = p0 & _MASK
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    word = ((c0 << _SH32) | c1) >> _SH11
    u1 = (np.float64(word) + 1.0) * _INV53
    u2 = (np.float64(c2) + 0.5) * _INV32
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
    u_bridge = (np.float64(c3) + 0.5) * _INV32
    return z, u_bridge


@njit(cache=True, parallel=True)
def simulate_paths_kernel(
    n_paths, d, D, v, sign, a, r0, dt, n_steps, r_escape, bridge, k0, k1, kinds, taus
):
    """Euler-Maruyama on the radial SDE for all paths; fills kinds and taus.

    kinds: 0 = hit, 1 = censored at the time horizon, 2 = censored at the
    escape radius.  taus is NaN except for hits, where it is the end time
    of the step in which the crossing happened (direct or by the bridge
    test).  Every draw is a pure function of (seed, path, step), so the
    result does not depend on the number of threads.
    """
    sqdt = math.sqrt(2.0 * D * dt)
    Ddt = D * dt
    sv = sign * v
    twoD = 2.0 * D
    dm1 = d - 1.0
    for p in prange(n_paths):
        path = np.uint64(p)
        rho = r0
        kind = np.uint8(1)
        tau = np.nan
        for m in range(n_steps):
            z, u_bridge = _step_draws(np.uint64(m), path, k0, k1)
            if d == 1:
                b = sv
            elif d == 2:
                b = (D + sv) / rho
            elif d == 3:
                b = (twoD + sv / rho) / rho
            else:
                b = D * dm1 / rho + sv / math.pow(rho, dm1)
            rho_new = rho + b * dt + sqdt * z
            if rho_new <= a:
                kind = np.uint8(0)
                tau = dt * (m + 1.0)
                break
            if bridge:
                p_hit = math.exp(-(rho - a) * (rho_new - a) / Ddt)
                if u_bridge < p_hit:
                    kind = np.uint8(0)
                    tau = dt * (m + 1.0)
                    break
            if rho_new >= r_escape:
                kind = np.uint8(2)
                break
            rho = rho_new
        kinds[p] = kind
        taus[p] = tau
