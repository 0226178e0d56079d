"""Monte Carlo first-passage ensembles for the radial SDE.

d rho = b(rho) dt + sqrt(2 D) dW,  absorbed at the target radius,
censored at the time horizon and at an escape radius.

Reproducibility contract: every random draw is a pure function of
(seed, path index, step index) through a counter-based stream (see
``rng``), so ensembles are identical across reruns, across worker
counts, and between the compiled kernel and the pure-python reference
path.  Hit times carry the granularity of one time step: a crossing
detected inside step m (directly or by the Brownian-bridge test) is
reported at the end time of that step.
"""

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import rng
from .analytic import prob_ever_hits
from .model import InvalidSpecError, sim_config_violations, validate

KIND_HIT = 0
KIND_CENSORED_TIME = 1
KIND_CENSORED_ESCAPE = 2
KIND_LABELS = ("hit", "censored_time", "censored_escape")


class NoHitsError(RuntimeError):
    """No conditioning possible: the ensemble contains zero hits."""

    def __init__(self, message, hit_fraction=0.0):
        super().__init__(message)
        self.hit_fraction = hit_fraction


class CensoringBiasError(ValueError):
    """r_escape is too small for the requested statistical precision."""


class CensoringBiasWarning(UserWarning):
    """Censoring bias bound exceeds the target precision but cannot be enforced."""


@dataclass(frozen=True)
class PathOutcome:
    """Terminal state of one simulated path.

    kind is one of 'hit', 'censored_time', 'censored_escape'; tau is the
    hit time and is present exactly when kind == 'hit'.
    """

    kind: str
    tau: float = None

    def __post_init__(self):
        if self.kind not in KIND_LABELS:
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if (self.tau is None) == (self.kind == "hit"):
            raise ValueError("tau must be present exactly for hits")


@dataclass(frozen=True)
class FirstPassageEnsemble:
    """Per-path outcomes of one Monte Carlo run.

    Stored compactly as two arrays (kind codes and hit times, NaN when
    not hit); `outcomes` materializes the PathOutcome view on demand.
    The conditioned sample, the object the duality statements are about,
    is the sorted array of hit times.
    """

    spec: object
    config: object
    kinds: np.ndarray
    taus: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kinds, dtype=np.uint8).copy()
        t = np.asarray(self.taus, dtype=float).copy()
        if k.shape != t.shape or k.ndim != 1:
            raise ValueError("kinds and taus must be 1D arrays of equal length")
        k.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "kinds", k)
        object.__setattr__(self, "taus", t)

    @property
    def n_paths(self):
        return len(self.kinds)

    @property
    def hit_mask(self):
        return self.kinds == KIND_HIT

    @property
    def hit_fraction(self):
        return float(np.count_nonzero(self.hit_mask)) / self.n_paths

    @property
    def conditioned_sample(self):
        """Sorted hit times (paths that reached the target)."""
        return np.sort(self.taus[self.hit_mask])

    @cached_property
    def outcomes(self):
        out = []
        for k, t in zip(self.kinds, self.taus):
            if k == KIND_HIT:
                out.append(PathOutcome("hit", float(t)))
            else:
                out.append(PathOutcome(KIND_LABELS[k]))
        return out


def censoring_bias_bound(spec, r_escape):
    """Probability that a path censored at r_escape would still have hit.

    This is the exact return probability of the continuous process from
    the escape radius (`prob_ever_hits` evaluated there), and it bounds
    the downward bias that escape censoring puts on the hit fraction.
    """
    return prob_ever_hits(spec, r_escape)


def default_escape_radius(spec, tol=1e-4, cap_factor=10.0):
    """Escape radius whose censoring bias bound is below tol.

    Closed form for d <= 2 with outward drift; for inward drift (where
    the time horizon, not the escape radius, does the censoring) and for
    d >= 3 with outward drift (where the return probability decays only
    polynomially, so the rule would put the boundary thousands of radii
    away) the radius is capped at cap_factor * start_radius and a warning
    explains the cap.
    """
    r0 = spec.start_radius
    a = spec.target_radius
    cap = cap_factor * r0
    if spec.drift_sign < 0 or spec.drift_strength == 0.0:
        return cap
    sig = spec.sigma_reduced
    if spec.d == 1:
        rule = a + math.log(1.0 / tol) / sig
    elif spec.d == 2:
        rule = a * tol ** (-1.0 / sig)
    else:
        lo, hi = r0, cap
        if prob_ever_hits(spec, hi) > tol:
            warnings.warn(
                f"return probability at {cap:g} is still "
                f"{prob_ever_hits(spec, cap):.3g} > {tol:g}; capping r_escape "
                "(polynomial decay in d >= 3 makes the rule impractical)",
                CensoringBiasWarning,
                stacklevel=2,
            )
            return cap
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if prob_ever_hits(spec, mid) > tol:
                lo = mid
            else:
                hi = mid
        rule = hi
    if rule > cap:
        warnings.warn(
            f"escape radius rule gives {rule:g}, capping at {cap:g}",
            CensoringBiasWarning,
            stacklevel=2,
        )
        return cap
    return max(rule, r0 + 0.1 * (r0 - a))


def _enforce_censoring_bound(spec, config):
    """Config-time check that escape censoring cannot distort the hit fraction.

    Enforced as a hard error only where it is both sound and attainable:
    outward drift in d <= 2 (there the bound decays exponentially or like
    a power of the radius).  For d >= 3, or without drift, no practical
    radius satisfies it, so the bound is reported as a warning instead;
    the distribution-level duality checks are unaffected by escape
    censoring (conditioning on hitting removes it).
    """
    if spec.drift_sign < 0:
        return
    bound = censoring_bias_bound(spec, config.r_escape)
    H = prob_ever_hits(spec)
    se = math.sqrt(H * (1.0 - H) / config.n_paths)
    limit = 0.1 * se
    if bound < limit:
        return
    message = (
        f"censoring bias bound {bound:.3g} at r_escape={config.r_escape:g} is not "
        f"below 0.1 * SE = {limit:.3g} for n_paths={config.n_paths}"
    )
    if spec.d <= 2 and spec.drift_strength > 0.0 and H < 1.0:
        needed = default_escape_radius(spec, tol=limit, cap_factor=math.inf)
        raise CensoringBiasError(f"{message}; increase r_escape to at least {needed:.4g}")
    warnings.warn(message, CensoringBiasWarning, stacklevel=3)


def simulate_path(spec, config, path_index):
    """Simulate one path in pure python; the bitwise reference implementation.

    Deterministic function of (spec, config, path_index): the same triple
    always produces the same outcome, and the compiled kernel produces
    the same bits (asserted by the tests).  Slow; useful for debugging
    and as the ground truth for the kernel.
    """
    D = spec.diffusion
    v = spec.drift_strength
    sign = float(spec.drift_sign)
    a = spec.target_radius
    d = spec.d
    dt = config.dt
    n_steps = int(round(config.t_max / dt))
    sqdt = math.sqrt(2.0 * D * dt)
    Ddt = D * dt
    sv = sign * v
    twoD = 2.0 * D
    dm1 = d - 1.0
    seed = int(config.seed)
    rho = spec.start_radius
    for m in range(n_steps):
        z, u_bridge = rng.step_draws(seed, path_index, m)
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
            return PathOutcome("hit", dt * (m + 1.0))
        if config.bridge_correction:
            p_hit = math.exp(-(rho - a) * (rho_new - a) / Ddt)
            if u_bridge < p_hit:
                return PathOutcome("hit", dt * (m + 1.0))
        if rho_new >= config.r_escape:
            return PathOutcome("censored_escape")
        rho = rho_new
    return PathOutcome("censored_time")


def run_ensemble(spec, config, engine="auto"):
    """Simulate config.n_paths independent paths.

    engine: 'numba' (default resolution of 'auto') runs the compiled
    parallel kernel; 'reference' runs the pure-python path loop (slow,
    for small cross-checks).  Both produce identical bits.

    Raises InvalidSpecError for structural config problems and
    CensoringBiasError when the escape radius cannot support the
    requested precision (d <= 2, outward drift).
    """
    validate(spec)
    errors = sim_config_violations(spec, config)
    if errors:
        raise InvalidSpecError(errors)
    _enforce_censoring_bound(spec, config)
    n = int(config.n_paths)
    n_steps = int(round(config.t_max / config.dt))
    kinds = np.empty(n, dtype=np.uint8)
    taus = np.empty(n, dtype=float)
    if engine == "auto":
        engine = "numba"
    if engine == "numba":
        from . import _kernels

        seed = int(config.seed)
        _kernels.simulate_paths_kernel(
            n,
            spec.d,
            float(spec.diffusion),
            float(spec.drift_strength),
            float(spec.drift_sign),
            float(spec.target_radius),
            float(spec.start_radius),
            float(config.dt),
            n_steps,
            float(config.r_escape),
            bool(config.bridge_correction),
            np.uint64(seed & 0xFFFFFFFF),
            np.uint64((seed >> 32) & 0xFFFFFFFF),
            kinds,
            taus,
        )
    elif engine == "reference":
        for p in range(n):
            outcome = simulate_path(spec, config, p)
            if outcome.kind == "hit":
                kinds[p] = KIND_HIT
                taus[p] = outcome.tau
            else:
                kinds[p] = KIND_LABELS.index(outcome.kind)
                taus[p] = np.nan
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return FirstPassageEnsemble(spec, config, kinds, taus)


class EmpiricalCDF:
    """Right-continuous step function of a sorted sample."""

    def __init__(self, sorted_sample):
        self.xs = np.asarray(sorted_sample, dtype=float)
        self.n = len(self.xs)
        self.ys = np.arange(1, self.n + 1) / self.n

    def __call__(self, t):
        idx = np.searchsorted(self.xs, t, side="right")
        return idx / self.n


@dataclass(frozen=True)
class ConditionedStats:
    """Hit-conditioned summary of an ensemble."""

    hit_fraction: float
    n_hits: int
    conditioned_mean: float
    conditioned_ecdf: EmpiricalCDF
    se_hit_fraction: float
    se_mean: float
    dkw_epsilon: float


def conditioned_statistics(ens, dkw_delta=0.05):
    """Hit fraction, conditioned mean and ECDF with their error scales.

    Standard errors: binomial for the hit fraction, sample variance for
    the conditioned mean, Dvoretzky-Kiefer-Wolfowitz envelope (confidence
    1 - dkw_delta) for the ECDF.  Raises NoHitsError (carrying
    hit_fraction = 0.0) when nothing hit.
    """
    sample = ens.conditioned_sample
    n_hits = len(sample)
    if n_hits == 0:
        raise NoHitsError("no conditioning possible: zero hits", hit_fraction=0.0)
    p = ens.hit_fraction
    mean = float(np.mean(sample))
    se_mean = float(np.std(sample, ddof=1) / math.sqrt(n_hits)) if n_hits > 1 else math.nan
    return ConditionedStats(
        hit_fraction=p,
        n_hits=n_hits,
        conditioned_mean=mean,
        conditioned_ecdf=EmpiricalCDF(sample),
        se_hit_fraction=math.sqrt(p * (1.0 - p) / ens.n_paths),
        se_mean=se_mean,
        dkw_epsilon=math.sqrt(math.log(2.0 / dkw_delta) / (2.0 * n_hits)),
    )


def run_ensemble_euclidean(spec, config):
    """Cross-check oracle: the same process in full d-dimensional coordinates.

    Steps all paths of the ensemble synchronously with numpy arrays using
    only the potential drift sign*v*|x|^(1-d) x_hat; the geometric 1/rho
    drift of the radial reduction emerges from the dimensionality, which
    is exactly what this oracle is meant to confirm.  Uses numpy's Philox
    stream (not the per-path counter stream); meant for statistical
    comparisons on small ensembles, not bitwise ones.
    """
    validate(spec)
    errors = sim_config_violations(spec, config)
    if errors:
        raise InvalidSpecError(errors)
    n = int(config.n_paths)
    d = spec.d
    D = spec.diffusion
    sv = spec.drift_sign * spec.drift_strength
    a = spec.target_radius
    dt = config.dt
    n_steps = int(round(config.t_max / dt))
    sqdt = math.sqrt(2.0 * D * dt)
    gen = np.random.Generator(np.random.Philox(int(config.seed)))

    x = np.zeros((n, d))
    x[:, 0] = spec.start_radius
    kinds = np.full(n, KIND_CENSORED_TIME, dtype=np.uint8)
    taus = np.full(n, np.nan)
    alive = np.arange(n)
    for m in range(n_steps):
        if len(alive) == 0:
            break
        xa = x[alive]
        rho = np.sqrt(np.sum(xa * xa, axis=1))
        z = gen.standard_normal((len(alive), d))
        xn = xa + (sv / rho ** d)[:, None] * xa * dt + sqdt * z
        rho_new = np.sqrt(np.sum(xn * xn, axis=1))
        hit = rho_new <= a
        if config.bridge_correction:
            u = gen.random(len(alive))
            p_hit = np.exp(-(rho - a) * (rho_new - a) / (D * dt))
            hit |= u < p_hit
        escaped = ~hit & (rho_new >= config.r_escape)
        kinds[alive[hit]] = KIND_HIT
        taus[alive[hit]] = dt * (m + 1.0)
        kinds[alive[escaped]] = KIND_CENSORED_ESCAPE
        keep = ~hit & ~escaped
        x[alive[keep]] = xn[keep]
        alive = alive[keep]
    return FirstPassageEnsemble(spec, config, kinds, taus)
