"""Numerical laboratory for first-passage duality of radially drifted diffusions.

The package cross-validates one family of identities three ways:

* ``analytic``  closed-form densities, hitting probabilities and mean
  first-passage times for a diffusion with radial drift toward (or away
  from) a d-sphere;
* ``simulate``  a reproducible Monte Carlo engine for the radial SDE with
  an absorbing inner boundary;
* ``numeric``   finite-difference solvers for the stationary and
  time-dependent forward/backward problems;
* ``duality``   the verification harness comparing all three engines;
* ``cli``       config-driven orchestration and report emission.

Importing this package does not import numba; the compiled Monte Carlo
kernel is loaded on first use so thread configuration can happen first.
"""

from .model import (
    ProcessSpec,
    SimConfig,
    GridSpec,
    InvalidSpecError,
    validate,
    spec_violations,
    drift_at,
    forward_drift_at,
)
from .analytic import (
    MeanFPT,
    INFINITE,
    occupation_density_1d,
    fp_density_1d,
    fp_cdf_1d,
    hitting_probability,
    prob_ever_hits,
    two_boundary_hit_probability,
    hitting_probability_derivative,
    mean_fpt,
    u0_factor,
)
from .numeric import Field
from .simulate import PathOutcome, FirstPassageEnsemble, run_ensemble, simulate_path

__version__ = "0.1.0"

__all__ = [
    "ProcessSpec",
    "SimConfig",
    "GridSpec",
    "InvalidSpecError",
    "validate",
    "spec_violations",
    "drift_at",
    "forward_drift_at",
    "MeanFPT",
    "INFINITE",
    "occupation_density_1d",
    "fp_density_1d",
    "fp_cdf_1d",
    "hitting_probability",
    "prob_ever_hits",
    "two_boundary_hit_probability",
    "hitting_probability_derivative",
    "mean_fpt",
    "u0_factor",
    "Field",
    "PathOutcome",
    "FirstPassageEnsemble",
    "run_ensemble",
    "simulate_path",
]
