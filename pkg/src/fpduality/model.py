"""Process, simulation and discretization configuration types.

Everything here is an immutable value type shared by the analytic,
Monte Carlo and finite-difference engines.  Construction never raises;
validation is explicit (`validate` / `spec_violations`) so a caller can
collect every violation at once, which is what the CLI needs for useful
error messages.
"""

from dataclasses import dataclass, replace

import numpy as np


class InvalidSpecError(ValueError):
    """Raised by validate(); carries the full list of violations."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ProcessSpec:
    """Radially drifted diffusion with an absorbing sphere of radius `target_radius`.

    The generator drift at radius rho is

        b(rho) = diffusion * (d - 1) / rho + drift_sign * drift_strength / rho**(d-1)

    for d >= 2, and b = drift_sign * drift_strength in one dimension.  The
    first term is the geometric (Bessel) part, the second the potential
    drift of magnitude `drift_strength` pointing away from (+1) or toward
    (-1) the sphere.  Exponents in the closed forms use the reduced drift
    sigma_reduced = drift_strength / diffusion.

    Fields
    ------
    d : int, spatial dimension, >= 1
    diffusion : float, D > 0 (length^2 / time)
    drift_strength : float, v >= 0 (raw strength; a velocity in 1D)
    drift_sign : int, +1 outward or -1 inward
    target_radius : float, a >= 0 (a = 0 only in 1D)
    start_radius : float, r0 > a
    """

    d: int
    diffusion: float
    drift_strength: float
    drift_sign: int
    target_radius: float
    start_radius: float

    @property
    def sigma_reduced(self):
        """Reduced drift sigma = v / D (dimensionless for d = 2)."""
        return self.drift_strength / self.diffusion

    def with_sign(self, drift_sign):
        """Copy of this spec with the drift sign replaced."""
        return replace(self, drift_sign=int(drift_sign))

    def distance_to_target(self):
        return self.start_radius - self.target_radius


def spec_violations(spec):
    """Return the list of invariant violations of a ProcessSpec (empty if valid)."""
    errors = []
    if isinstance(spec.d, bool) or not isinstance(spec.d, (int, np.integer)):
        errors.append("d: must be an integer")
    elif spec.d < 1:
        errors.append("d: must be >= 1")
    if not spec.diffusion > 0.0:
        errors.append("diffusion: must be > 0")
    if spec.drift_strength < 0.0:
        errors.append("drift_strength: must be >= 0")
    if spec.drift_sign not in (1, -1):
        errors.append("drift_sign: must be +1 or -1")
    if spec.target_radius < 0.0:
        errors.append("target_radius: must be >= 0")
    if (
        isinstance(spec.d, (int, np.integer))
        and not isinstance(spec.d, bool)
        and spec.d >= 2
        and spec.target_radius <= 0.0
    ):
        errors.append("target_radius: a > 0 required for d >= 2")
    if not spec.start_radius > spec.target_radius:
        errors.append("start_radius: must exceed target_radius")
    return errors


def validate(spec):
    """Return `spec` unchanged if all invariants hold, else raise InvalidSpecError.

    The exception's .errors attribute lists every violated invariant with
    the offending field name, so configuration front ends can report them
    all at once.
    """
    errors = spec_violations(spec)
    if errors:
        raise InvalidSpecError(errors)
    return spec


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo controls.

    n_paths : number of independent paths, >= 1
    dt : Euler-Maruyama step, > 0
    t_max : censoring horizon (paths alive at t_max are censored_time)
    r_escape : censoring radius (paths beyond it are censored_escape)
    seed : 64-bit base seed of the counter-based stream
    bridge_correction : apply the Brownian-bridge crossing test at the
        inner boundary between steps (on by default)
    """

    n_paths: int
    dt: float
    t_max: float
    r_escape: float
    seed: int
    bridge_correction: bool = True


def sim_config_violations(spec, config):
    """Structural invariants of a SimConfig against its ProcessSpec.

    The statistical censoring-bias bound is enforced separately in
    `simulate.run_ensemble` because it needs the closed-form hitting
    probability.
    """
    errors = []
    if config.n_paths < 1:
        errors.append("n_paths: must be >= 1")
    if not config.dt > 0.0:
        errors.append("dt: must be > 0")
    if not config.t_max > config.dt:
        errors.append("t_max: must exceed dt")
    if not config.r_escape > spec.start_radius:
        errors.append("r_escape: must exceed start_radius")
    if not 0 <= int(config.seed) < 2 ** 64:
        errors.append("seed: must fit in 64 bits")
    return errors


@dataclass(frozen=True)
class GridSpec:
    """Uniform finite-difference discretization of [a, r_max].

    r_max : outer truncation radius, > start_radius
    n_cells : number of cells (n_cells + 1 nodes), >= 16
    dt : PDE time step (unused by the stationary solvers)
    t_end : final time of a time-dependent solve
    """

    r_max: float
    n_cells: int
    dt: float
    t_end: float

    def spacing(self, spec):
        return (self.r_max - spec.target_radius) / self.n_cells


def grid_violations(spec, grid):
    errors = []
    if not grid.r_max > spec.start_radius:
        errors.append("r_max: must exceed start_radius")
    if grid.n_cells < 16:
        errors.append("n_cells: must be >= 16")
    if not grid.dt > 0.0:
        errors.append("dt: must be > 0")
    if not grid.t_end > 0.0:
        errors.append("t_end: must be > 0")
    return errors


def drift_at(spec, rho):
    """Generator (backward-equation) drift b(rho).

    b = D (d-1)/rho + sign * v / rho^(d-1) for d >= 2; constant sign * v
    in one dimension.  Accepts scalars or arrays.  Radii below the target
    radius or at/below zero are outside the domain of the process and
    raise ValueError.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0.0) or np.any(rho_arr < spec.target_radius):
        raise ValueError("rho must be positive and >= target_radius")
    s = float(spec.drift_sign)
    if spec.d == 1:
        out = np.full_like(rho_arr, s * spec.drift_strength)
    else:
        out = spec.diffusion * (spec.d - 1) / rho_arr + (
            s * spec.drift_strength / rho_arr ** (spec.d - 1)
        )
    return float(out) if np.isscalar(rho) else out


def forward_drift_at(spec, rho):
    """First-order coefficient of the forward (Fokker-Planck) operator.

    In the radial volume-weighted form (density u with mass
    integral u * rho^(d-1) drho) the forward operator is

        L* u = D u'' + (D (d-1)/rho - sign * v / rho^(d-1)) u'

    with no zeroth-order term; this function returns that first-order
    coefficient.  Relative to drift_at the potential drift flips sign,
    the geometric part does not.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0.0) or np.any(rho_arr < spec.target_radius):
        raise ValueError("rho must be positive and >= target_radius")
    s = float(spec.drift_sign)
    if spec.d == 1:
        out = np.full_like(rho_arr, -s * spec.drift_strength)
    else:
        out = spec.diffusion * (spec.d - 1) / rho_arr - (
            s * spec.drift_strength / rho_arr ** (spec.d - 1)
        )
    return float(out) if np.isscalar(rho) else out
