"""Finite-difference solvers on the radial domain [a, r_max].

Second-order central differences in space, Crank-Nicolson in time with an
optional backward-Euler startup (the initial survival profile has a jump
at the absorbing node; a couple of damped half steps remove the startup
ringing that plain Crank-Nicolson would carry for a long time).  All
tridiagonal work goes through scipy.linalg.solve_banded.

Boundary handling, chosen once and used everywhere:

* stationary hitting solve: Dirichlet 1 at the target, closed-form value
  at r_max (this removes the dominant truncation error);
* mean first-passage solve: Dirichlet 0 at the target; at r_max the
  closed-form value when one is known (d = 2 with v > 2D, and d = 1),
  otherwise a zero-second-derivative (linear extrapolation) row plus a
  doubling-r_max check that raises MeanDivergesError when the answer
  keeps moving, which is how infinite-mean regimes surface here;
* time stepping: the two boundary values of the input field are carried
  along unchanged (0 at the absorbing node; 1 far away for survival,
  0 far away for densities).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .analytic import (
    hitting_probability,
    prob_ever_hits,
    is_recurrent,
    TransientMeanError,
)
from .model import drift_at, forward_drift_at, GridSpec

_trapz = getattr(np, "trapezoid", None) or np.trapz


class AccuracyWarning(UserWarning):
    """The discretization is stable but outside its accuracy budget."""


class MeanDivergesError(RuntimeError):
    """Mean first-passage value keeps growing as the domain is enlarged."""


@dataclass(frozen=True)
class Field:
    """Samples of a radial profile at one time.

    grid : uniform radii, target_radius = grid[0] < ... < grid[-1] = r_max
    values : one real per node
    time_stamp : the time the samples refer to (0.0 for stationary solves)
    """

    grid: np.ndarray
    values: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).copy()
        v = np.asarray(self.values, dtype=float).copy()
        if g.shape != v.shape or g.ndim != 1:
            raise ValueError("grid and values must be 1D arrays of equal length")
        g.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def spacing(self):
        return (self.grid[-1] - self.grid[0]) / (len(self.grid) - 1)

    def at(self, r):
        """Linear interpolation (second-order accurate on these grids)."""
        return float(np.interp(r, self.grid, self.values))


def grid_radii(spec, grid):
    return np.linspace(spec.target_radius, grid.r_max, grid.n_cells + 1)


def _interior_bands(spec, grid, which, drift_override=None):
    """Stencil bands (lo, di, up) on interior nodes 1..n-1."""
    r = grid_radii(spec, grid)
    h = grid.spacing(spec)
    ri = r[1:-1]
    if drift_override is not None:
        b = np.asarray(drift_override, dtype=float)
        if b.shape != ri.shape:
            raise ValueError("drift_override must have one value per interior node")
    elif which == "backward":
        b = drift_at(spec, ri) if spec.d > 1 else np.full_like(
            ri, spec.drift_sign * spec.drift_strength
        )
    elif which == "forward":
        b = forward_drift_at(spec, ri) if spec.d > 1 else np.full_like(
            ri, -spec.drift_sign * spec.drift_strength
        )
    else:
        raise ValueError("which must be 'forward' or 'backward'")
    D = spec.diffusion
    lo = D / h ** 2 - b / (2.0 * h)
    di = np.full_like(ri, -2.0 * D / h ** 2)
    up = D / h ** 2 + b / (2.0 * h)
    return lo, di, up


def _peclet_warning(spec, grid, which):
    r = grid_radii(spec, grid)
    h = grid.spacing(spec)
    ri = r[1:-1]
    if spec.d > 1:
        b = drift_at(spec, ri) if which == "backward" else forward_drift_at(spec, ri)
        bmax = float(np.max(np.abs(b)))
    else:
        bmax = spec.drift_strength
    pe = bmax * h / (2.0 * spec.diffusion)
    if pe > 1.0:
        warnings.warn(
            f"cell Peclet number {pe:.3g} exceeds 1; the centered scheme is "
            "stable but may oscillate, refine the grid",
            AccuracyWarning,
            stacklevel=3,
        )


def operator_apply(spec, grid, f, which="backward", drift_override=None):
    """Apply the spatial operator to a field with central differences.

    Boundary nodes of the result are set to zero (the stencil is interior
    only); which = 'backward' applies D g'' + b g', which = 'forward'
    applies the volume-weighted forward operator D g'' + b* g'.
    drift_override replaces the first-order coefficient on the interior
    nodes, which the harness uses to inject broken drifts.
    """
    vals = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    lo, di, up = _interior_bands(spec, grid, which, drift_override)
    out = np.zeros_like(vals)
    out[1:-1] = lo * vals[:-2] + di * vals[1:-1] + up * vals[2:]
    r = grid_radii(spec, grid)
    t = f.time_stamp if isinstance(f, Field) else 0.0
    return Field(r, out, t)


def operator_matrix(spec, grid, which="backward"):
    """Dense matrix of the discrete operator (zero boundary rows).

    Only intended for the adjoint-pairing tests on small grids; the
    solvers assemble banded systems directly.
    """
    n = grid.n_cells
    lo, di, up = _interior_bands(spec, grid, which)
    A = np.zeros((n + 1, n + 1))
    idx = np.arange(1, n)
    A[idx, idx - 1] = lo
    A[idx, idx] = di
    A[idx, idx + 1] = up
    return A


def radial_mass(spec, grid, f):
    """Trapezoid integral of f against the volume weight r^(d-1)."""
    r = grid_radii(spec, grid)
    vals = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    return float(_trapz(vals * r ** (spec.d - 1), r))


def solve_hitting_ode(spec, grid):
    """Stationary hitting factor by a tridiagonal boundary-value solve.

    Dirichlet 1 at the target node, closed form at r_max.  For the inward
    drift sign the constant-one field is returned directly (that is the
    convention of the closed form; see analytic.hitting_probability).
    Max-norm error against the closed form is O(h^2).
    """
    r = grid_radii(spec, grid)
    if spec.drift_sign < 0:
        return Field(r, np.ones_like(r), 0.0)
    _peclet_warning(spec, grid, "backward")
    n = grid.n_cells
    lo, di, up = _interior_bands(spec, grid, "backward")
    ab = np.zeros((3, n + 1))
    ab[1, 0] = 1.0
    ab[1, n] = 1.0
    ab[1, 1:n] = di
    ab[0, 2 : n + 1] = up
    ab[2, 0 : n - 1] = lo
    rhs = np.zeros(n + 1)
    rhs[0] = 1.0
    rhs[n] = hitting_probability(spec, grid.r_max)
    try:
        H = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - valid grids never hit this
        raise RuntimeError(f"singular tridiagonal system (n={n}, h={grid.spacing(spec)})") from exc
    # identity boundary rows again; keep the Dirichlet data bit-exact
    H[0] = rhs[0]
    H[n] = rhs[n]
    return Field(r, H, 0.0)


def hit_probability_field(spec, grid):
    """Field of the true hit probability (absorption at infinity) on the grid.

    This is the weight a conditioned mean solve needs.  For d <= 2 it
    agrees with solve_hitting_ode up to O(h^2); for d > 2 it does not
    (the stationary closed form does not vanish at infinity), so use this
    one when conditioning in high dimension.
    """
    r = grid_radii(spec, grid)
    vals = np.array([prob_ever_hits(spec, float(x)) for x in r])
    return Field(r, vals, 0.0)


def _mean_outer_closed_form(spec, r_max):
    """Closed form for the unconditioned inward mean at the outer node, if known."""
    if spec.d == 1 and spec.drift_strength > 0.0:
        return (r_max - spec.target_radius) / spec.drift_strength
    if spec.d == 2 and spec.drift_strength > 2.0 * spec.diffusion:
        a = spec.target_radius
        return (r_max * r_max - a * a) / (2.0 * (spec.drift_strength - 2.0 * spec.diffusion))
    return None


def solve_mean_fpt_ode(spec, grid, conditioned=False, hit_prob=None, check_domain=True):
    """Mean first-passage time profile T(r) (or conditioned T~(r)).

    Unconditioned: solves L T = -1 with T(a) = 0; requires a recurrent
    spec (inward drift or no drift in d <= 2), otherwise
    TransientMeanError.  Conditioned: solves L (H T~) = -H for the
    product and divides by H; `hit_prob` must be supplied (the output of
    solve_hitting_ode for d <= 2, or hit_probability_field for d > 2,
    where the stationary closed form is not the hit probability).

    The outer boundary uses the closed-form value when one is known and a
    zero-second-derivative extrapolation row otherwise; in the latter
    case the solve is repeated on a doubled domain and MeanDivergesError
    is raised if the value at start_radius moved by more than 1 percent.
    That catches the infinite-mean regimes (d = 1 driftless, d = 2 with
    drift up to 2D, and every conditioned solve in d = 3 or 4, where the
    conditioned mean genuinely diverges) and also the d >= 5 conditioned
    case, where the mean is finite but no truncation closes the far
    boundary: the conditioned profile grows like r^2, so any local outer
    condition admits an O(r_max^2) homogeneous contamination.
    """
    r = grid_radii(spec, grid)
    n = grid.n_cells
    if conditioned:
        if hit_prob is None:
            raise ValueError(
                "conditioned solve needs hit_prob (solve_hitting_ode for d <= 2, "
                "hit_probability_field for d > 2)"
            )
        if len(hit_prob.values) != n + 1:
            raise ValueError("hit_prob was computed on a different grid")
        Hv = hit_prob.values
    else:
        if not is_recurrent(spec):
            raise TransientMeanError("transient: unconditioned mean undefined")
        Hv = np.ones_like(r)
    _peclet_warning(spec, grid, "backward")
    lo, di, up = _interior_bands(spec, grid, "backward")

    # duality pins the conditioned outward mean to the inward one, so the
    # closed-form outer value (when it exists) serves both cases
    t_outer = _mean_outer_closed_form(spec.with_sign(-1), grid.r_max)
    extrapolated = t_outer is None

    # banded storage with (l, u) = (2, 1): the extra subdiagonal holds the
    # outer extrapolation row W_{n-2} - 2 W_{n-1} + W_n = 0 when needed
    ab = np.zeros((4, n + 1))
    ab[1, 0] = 1.0
    ab[1, 1:n] = di
    ab[0, 2 : n + 1] = up
    ab[2, 0 : n - 1] = lo
    rhs = np.empty(n + 1)
    rhs[0] = 0.0
    rhs[1:n] = -Hv[1:n]
    ab[1, n] = 1.0
    if extrapolated:
        ab[2, n - 1] = -2.0
        ab[3, n - 2] = 1.0
        rhs[n] = 0.0
    else:
        rhs[n] = Hv[n] * t_outer
    W = solve_banded((2, 1), ab, rhs)
    T = W / Hv
    T[0] = 0.0
    result = Field(r, T, 0.0)

    if extrapolated and check_domain:
        big = GridSpec(
            r_max=spec.target_radius + 2.0 * (grid.r_max - spec.target_radius),
            n_cells=2 * n,
            dt=grid.dt,
            t_end=grid.t_end,
        )
        hp_big = hit_probability_field(spec, big) if conditioned else None
        bigger = solve_mean_fpt_ode(spec, big, conditioned, hp_big, check_domain=False)
        probe = spec.start_radius
        v0, v1 = result.at(probe), bigger.at(probe)
        if abs(v1 - v0) > 0.01 * (1.0 + abs(v0)):
            raise MeanDivergesError(
                f"mean at r={probe:g} moved from {v0:.6g} to {v1:.6g} when the "
                "domain was doubled; no domain-independent finite value "
                "(infinite-mean regime, or an unclosable far boundary)"
            )
    return result


def _cn_system(spec, grid, which, dt_step, theta):
    """Banded implicit matrix I - theta*dt*L and the explicit band weights."""
    n = grid.n_cells
    lo, di, up = _interior_bands(spec, grid, which)
    ab = np.zeros((3, n + 1))
    ab[1, 0] = 1.0
    ab[1, n] = 1.0
    ab[1, 1:n] = 1.0 - theta * dt_step * di
    ab[0, 2 : n + 1] = -theta * dt_step * up
    ab[2, 0 : n - 1] = -theta * dt_step * lo
    return ab, (lo, di, up)


def _explicit_apply(vals, bands, weight):
    lo, di, up = bands
    out = vals.copy()
    out[1:-1] = vals[1:-1] + weight * (lo * vals[:-2] + di * vals[1:-1] + up * vals[2:])
    return out


def _advance(vals, ab, bands, dt_step, theta):
    rhs = _explicit_apply(vals, bands, (1.0 - theta) * dt_step)
    rhs[0] = vals[0]
    rhs[-1] = vals[-1]
    out = solve_banded((1, 1), ab, rhs)
    # the boundary rows are identities, but partial pivoting in the banded
    # solve can smudge them by an ulp; re-impose the Dirichlet values exactly
    out[0] = vals[0]
    out[-1] = vals[-1]
    return out


def step_backward(spec, grid, S):
    """One Crank-Nicolson step of the survival (backward) equation.

    The two boundary values of the input are carried along unchanged.
    Accurate for fields that are smooth on the grid scale; evolving from
    the discontinuous initial condition is the job of run_survival, whose
    damped startup keeps the survival profile monotone.
    """
    _peclet_warning(spec, grid, "backward")
    ab, bands = _cn_system(spec, grid, "backward", grid.dt, 0.5)
    vals = _advance(S.values, ab, bands, grid.dt, 0.5)
    return Field(S.grid, vals, S.time_stamp + grid.dt)


def step_forward(spec, grid, u):
    """One Crank-Nicolson step of the occupation-density (forward) equation."""
    _peclet_warning(spec, grid, "forward")
    ab, bands = _cn_system(spec, grid, "forward", grid.dt, 0.5)
    vals = _advance(u.values, ab, bands, grid.dt, 0.5)
    return Field(u.grid, vals, u.time_stamp + grid.dt)


def _run_evolution(spec, grid, which, init, sample_times, startup_halfsteps):
    if startup_halfsteps < 0 or startup_halfsteps % 2:
        raise ValueError("startup_halfsteps must be a nonnegative even number")
    dt = grid.dt
    times = sorted(float(t) for t in sample_times)
    steps = []
    for t in times:
        m = round(t / dt)
        if m < 1 or abs(m * dt - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"sample time {t} is not a positive multiple of dt={dt}")
        steps.append(m)
    ab_half, bands = _cn_system(spec, grid, which, dt / 2.0, 1.0)
    ab_cn, _ = _cn_system(spec, grid, which, dt, 0.5)
    vals = init.copy()
    out = []
    startup_full_steps = startup_halfsteps // 2
    want = dict((m, None) for m in steps)
    last = max(steps)
    r = grid_radii(spec, grid)
    for m in range(1, last + 1):
        if m <= startup_full_steps:
            # backward Euler in two half steps: damps the startup modes,
            # costs O(dt^2) locally so the global order is unchanged
            vals = _advance(vals, ab_half, bands, dt / 2.0, 1.0)
            vals = _advance(vals, ab_half, bands, dt / 2.0, 1.0)
        else:
            vals = _advance(vals, ab_cn, bands, dt, 0.5)
        if m in want:
            out.append(Field(r, vals, m * dt))
    return out


def run_survival(spec, grid, sample_times, startup_halfsteps=2, far_value=1.0):
    """Survival probability fields S(r, t) at the requested times.

    Initial condition: 1 everywhere except 0 at the absorbing node; the
    outer node is held at `far_value` (1 unless the domain is so small
    that the closed-form far survival should be imposed instead).  Sample
    times must be positive multiples of grid.dt.
    """
    _peclet_warning(spec, grid, "backward")
    r = grid_radii(spec, grid)
    init = np.ones_like(r)
    init[0] = 0.0
    init[-1] = far_value
    return _run_evolution(spec, grid, "backward", init, sample_times, startup_halfsteps)


def run_forward(spec, grid, init_values, sample_times, startup_halfsteps=2):
    """Occupation-density fields from a given initial profile.

    Dirichlet 0 at both ends (absorbing target; the outer boundary is
    assumed far enough that no mass reaches it).
    """
    _peclet_warning(spec, grid, "forward")
    init = np.asarray(init_values, dtype=float).copy()
    init[0] = 0.0
    init[-1] = 0.0
    return _run_evolution(spec, grid, "forward", init, sample_times, startup_halfsteps)


def first_passage_density_from_survival(S_series, r0):
    """Sampled first-passage density at start radius r0 from stored survivals.

    f(t_k) = -(S(r0, t_{k+1}) - S(r0, t_{k-1})) / (t_{k+1} - t_{k-1});
    the minus sign makes the density nonnegative.  Needs at least three
    stored time levels; returns (times, densities) for the interior
    levels.
    """
    if len(S_series) < 3:
        raise ValueError("need at least 3 stored time levels for centered differencing")
    times = np.array([f.time_stamp for f in S_series])
    s_at = np.array([f.at(r0) for f in S_series])
    f_vals = -(s_at[2:] - s_at[:-2]) / (times[2:] - times[:-2])
    return times[1:-1], f_vals
