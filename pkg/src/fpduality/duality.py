"""Checks that the inward and outward first-passage problems agree.

Four independent checks, each returning a small verdict object:

  check_distribution_duality  two-sample KS test on conditioned hit times
  check_mean_duality          conditioned outward mean vs inward mean,
                              through the analytic, Monte Carlo or ODE
                              engine
  check_theorem1_residual     grid-refinement study of the operator
                              identity L+ (S- H+) = d/dt (S- H+)
  check_proposition           grid-refinement study of the 1D statement
                              "v solves the backward equation implies
                              u0 * v solves the forward equation"

Verdicts never conflate "the identity fails" with "the mean is infinite
in this drift regime": the latter is the distinct INF_REGIME outcome.
All verdicts are plain data; combine them into a DualityReport for
serialization.
"""

import math
import warnings
from dataclasses import dataclass, replace

import mpmath
import numpy as np

from .analytic import INFINITE, mean_fpt, two_boundary_hit_probability
from .model import GridSpec, ProcessSpec, validate
from .numeric import (
    Field,
    grid_radii,
    operator_apply,
    run_survival,
    solve_hitting_ode,
    solve_mean_fpt_ode,
)
from .simulate import CensoringBiasWarning, conditioned_statistics

PASS = "PASS"
FAIL = "FAIL"
INF_REGIME = "INF-REGIME"

MEAN_SE_LIMIT = 3.0
RATIO_BAND = (3.5, 4.5)


class ConfigMismatchError(ValueError):
    """The two inputs describe incompatible processes."""


class InsufficientSampleError(RuntimeError):
    """Too few hits for the statistical check to mean anything."""


def ks_2sample(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic (max ECDF gap)."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("KS statistic needs nonempty samples")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / len(a)
    cdf_b = np.searchsorted(b, pooled, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical(alpha, n, m):
    """Asymptotic two-sample critical value c(alpha) sqrt((n+m)/(nm)).

    c(0.01) = sqrt(-ln(0.005)/2) = 1.628.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True)
class KSVerdict:
    statistic: float
    critical: float
    alpha: float
    n_plus: int
    n_minus: int
    drift_matched: bool
    passed: bool

    @property
    def verdict(self):
        return PASS if self.passed else FAIL


def _match_field(errors, name, left, right):
    if left != right:
        errors.append(f"{name}: {left!r} vs {right!r}")


def check_distribution_duality(ens_plus, ens_minus, alpha=0.01, min_hits=100):
    """KS test that the conditioned hit-time samples are equidistributed.

    The two ensembles must describe the same geometry and diffusion with
    opposite drift signs.  A drift-strength mismatch is allowed but
    flagged (drift_matched=False): that configuration is the negative
    control and is expected to fail the test, not to be rejected as
    malformed input.
    """
    sp, sm = ens_plus.spec, ens_minus.spec
    errors = []
    _match_field(errors, "d", sp.d, sm.d)
    _match_field(errors, "diffusion", sp.diffusion, sm.diffusion)
    _match_field(errors, "target_radius", sp.target_radius, sm.target_radius)
    _match_field(errors, "start_radius", sp.start_radius, sm.start_radius)
    if sp.drift_sign != 1 or sm.drift_sign != -1:
        errors.append(
            f"drift signs must be (+1, -1), got ({sp.drift_sign}, {sm.drift_sign})"
        )
    if errors:
        raise ConfigMismatchError("; ".join(errors))
    tp = ens_plus.conditioned_sample
    tm = ens_minus.conditioned_sample
    if len(tp) < min_hits or len(tm) < min_hits:
        raise InsufficientSampleError(
            f"need at least {min_hits} hits per ensemble, got "
            f"{len(tp)} (+) and {len(tm)} (-)"
        )
    stat = ks_2sample(tp, tm)
    crit = ks_critical(alpha, len(tp), len(tm))
    return KSVerdict(
        statistic=stat,
        critical=crit,
        alpha=alpha,
        n_plus=len(tp),
        n_minus=len(tm),
        drift_matched=sp.drift_strength == sm.drift_strength,
        passed=stat < crit,
    )


@dataclass(frozen=True)
class MeanDualityVerdict:
    engine: str
    mean_plus_conditioned: object
    mean_minus: object
    diff: float
    scale: float
    diff_in_units: float
    verdict: str

    @property
    def passed(self):
        return self.verdict != FAIL


def infinite_mean_regime(spec):
    """True when the mean the duality would compare is infinite.

    d = 1: only the driftless case.  d = 2: any drift up to 2D (the
    logarithmic trap).  d = 3 and 4: always; both signs are transient
    and even the hit-conditioned mean diverges, because the expected
    occupation of a far shell decays like r^(2-d) while its conditioned
    weight only decays like another r^(2-d) against the r^(d-1) volume.
    d >= 5: the conditioned means are finite again.
    """
    if spec.d == 1:
        return spec.drift_strength == 0.0
    if spec.d == 2:
        return spec.drift_strength <= 2.0 * spec.diffusion
    return spec.d <= 4


def _inf_regime_verdict(engine):
    return MeanDualityVerdict(
        engine=engine,
        mean_plus_conditioned=INFINITE,
        mean_minus=INFINITE,
        diff=None,
        scale=None,
        diff_in_units=None,
        verdict=INF_REGIME,
    )


def _numeric_mean_pair(spec, grid):
    """(conditioned outward mean, inward mean) at start_radius on one grid."""
    sp = spec.with_sign(+1)
    sm = spec.with_sign(-1)
    hp = solve_hitting_ode(sp, grid)
    t_plus = solve_mean_fpt_ode(sp, grid, conditioned=True, hit_prob=hp)
    t_minus = solve_mean_fpt_ode(sm, grid)
    r0 = spec.start_radius
    return t_plus.at(r0), t_minus.at(r0)


def _warn_if_truncated(spec, ens, observed_mean, se, label):
    """Flag a conditioned mean that escape censoring plausibly shifted.

    Paths that reach r_escape before the target are dropped from the
    conditioned sample, and under the inward drift each dropped path
    would have carried a hitting time of at least the mean return time
    from r_escape.  Dropped weight times that return time is therefore a
    rough lower bound on the shift; conditioned outward paths follow the
    same law (the duality), so one bound serves both ensembles.  The
    weight decays only polynomially in r_escape for d = 2, which makes
    moderate radii genuinely dangerous: 1e5 inward paths at D=1, v=4,
    r0=2 censored at r_escape=12 sit about seven SE below the true mean.
    """
    inward = spec.with_sign(-1)
    lost = 1.0 - two_boundary_hit_probability(inward, ens.config.r_escape)
    if lost <= 0.0:
        return
    return_time = mean_fpt(replace(inward, start_radius=ens.config.r_escape))
    if return_time is INFINITE:
        return
    shift = lost * max(return_time - observed_mean, 0.0)
    if shift > se:
        warnings.warn(
            CensoringBiasWarning(
                f"{label} ensemble: escape censoring at "
                f"r_escape={ens.config.r_escape:g} plausibly shifts the "
                f"conditioned mean by ~{shift:.2g} (> 1 SE = {se:.2g}); "
                f"enlarge r_escape (and t_max) until the shift estimate "
                f"drops below the SE"
            ),
            stacklevel=3,
        )


def check_mean_duality(
    spec,
    engine="analytic",
    *,
    ens_plus=None,
    ens_minus=None,
    grid=None,
    se_units=MEAN_SE_LIMIT,
):
    """Compare the conditioned outward mean with the inward mean.

    engine 'analytic' uses the closed forms (d <= 2 only), 'simulate'
    the conditioned statistics of the two supplied ensembles, 'numeric'
    the mean ODE solves on `grid` with a Richardson estimate of the grid
    error.  The difference is reported in combined error units
    (statistical SE or grid error); pass iff below `se_units`.

    In an infinite-mean drift regime every engine short-circuits to the
    INF_REGIME verdict: censored Monte Carlo or finite-domain solves
    would otherwise quietly report finite numbers for a divergent
    quantity.

    Only d <= 2 is accepted: the statement compares against the
    unconditioned mean of the recurrent inward member, and no inward
    sign is recurrent beyond two dimensions (worse, the conditioned
    means are themselves infinite for d = 3 and 4; see
    infinite_mean_regime).  The distribution-level check has no such
    restriction.
    """
    validate(spec)
    if spec.d > 2:
        raise ValueError(
            "mean duality needs the recurrent inward member, so d <= 2; "
            "use check_distribution_duality in higher dimension"
        )
    if infinite_mean_regime(spec):
        return _inf_regime_verdict(engine)

    if engine == "analytic":
        m_plus = mean_fpt(spec.with_sign(+1), conditioned=True)
        m_minus = mean_fpt(spec.with_sign(-1))
        if m_plus is INFINITE or m_minus is INFINITE:
            return _inf_regime_verdict(engine)
        diff = abs(m_plus - m_minus)
        scale = 1e-12 * (1.0 + abs(m_minus))
    elif engine == "simulate":
        if ens_plus is None or ens_minus is None:
            raise ValueError("simulate engine needs ens_plus and ens_minus")
        errors = []
        for ens, want in ((ens_plus, 1), (ens_minus, -1)):
            base = ens.spec.with_sign(spec.drift_sign)
            if base != spec:
                errors.append(f"ensemble spec {ens.spec} does not match {spec}")
            elif ens.spec.drift_sign != want:
                errors.append(f"expected drift sign {want}, got {ens.spec.drift_sign}")
        if errors:
            raise ConfigMismatchError("; ".join(errors))
        stats_p = conditioned_statistics(ens_plus)
        stats_m = conditioned_statistics(ens_minus)
        m_plus = stats_p.conditioned_mean
        m_minus = stats_m.conditioned_mean
        _warn_if_truncated(spec, ens_plus, m_plus, stats_p.se_mean, "outward")
        _warn_if_truncated(spec, ens_minus, m_minus, stats_m.se_mean, "inward")
        diff = abs(m_plus - m_minus)
        scale = math.hypot(stats_p.se_mean, stats_m.se_mean)
    elif engine == "numeric":
        if grid is None:
            raise ValueError("numeric engine needs a grid")
        m_plus, m_minus = _numeric_mean_pair(spec, grid)
        n = grid.n_cells
        if n % 2 == 0 and n // 2 >= 16:
            coarse = GridSpec(grid.r_max, n // 2, grid.dt, grid.t_end)
            c_plus, c_minus = _numeric_mean_pair(spec, coarse)
            # second-order solves: |fine - exact| ~ |coarse - fine| / 3
            err = math.hypot(c_plus - m_plus, c_minus - m_minus) / 3.0
        else:
            fine = GridSpec(grid.r_max, 2 * n, grid.dt, grid.t_end)
            f_plus, f_minus = _numeric_mean_pair(spec, fine)
            err = 4.0 / 3.0 * math.hypot(f_plus - m_plus, f_minus - m_minus)
        diff = abs(m_plus - m_minus)
        scale = max(err, 1e-14 * (1.0 + abs(m_minus)))
    else:
        raise ValueError(f"unknown engine {engine!r}")

    units = diff / scale
    return MeanDualityVerdict(
        engine=engine,
        mean_plus_conditioned=m_plus,
        mean_minus=m_minus,
        diff=diff,
        scale=scale,
        diff_in_units=units,
        verdict=PASS if units < se_units else FAIL,
    )


@dataclass(frozen=True)
class Theorem1Result:
    levels: tuple
    residual_norms: tuple
    ratios: tuple
    window: tuple
    t_eval: float
    ratio_band: tuple
    converged: bool

    @property
    def verdict(self):
        return PASS if self.converged else FAIL

    @property
    def passed(self):
        return self.converged


def default_window(spec, r_max):
    """Interior window for residual norms, clear of both boundary layers."""
    a = spec.target_radius
    L = r_max - a
    return (a + L / 12.0, a + 2.0 * L / 3.0)


def check_theorem1_residual(
    spec,
    grid_levels,
    t_eval=1.0,
    window=None,
    startup_halfsteps=2,
    drift_perturbation=None,
    ratio_band=RATIO_BAND,
):
    """Refinement study of the identity L+ (S- H+) = d/dt (S- H+).

    Per level: evolve the inward survival S- to t_eval - dt, t_eval,
    t_eval + dt; multiply by the stationary hitting factor H+ from
    solve_hitting_ode; compare the outward operator applied to the
    product against the centered time derivative.  Norms are max over
    the window (default: clear of the absorbing wall layer and of the
    outer boundary).  Halving h and dt together must cut the residual
    by about 4; `converged` records whether every ratio landed in
    ratio_band.

    drift_perturbation, a callable multiplier applied to the potential
    part of the outward drift inside the operator only, is the negative
    control: any perturbation breaks the identity and the residual
    stalls at a level-independent value.
    """
    validate(spec)
    grids = list(grid_levels)
    if len(grids) < 2:
        raise ValueError("need at least two refinement levels")
    r_max = grids[0].r_max
    if any(g.r_max != r_max for g in grids):
        raise ValueError("all refinement levels must share r_max")
    sp = spec.with_sign(+1)
    sm = spec.with_sign(-1)
    if window is None:
        window = default_window(spec, r_max)

    norms = []
    for grid in grids:
        dt = grid.dt
        m = round(t_eval / dt)
        if m < 2 or abs(m * dt - t_eval) > 1e-9:
            raise ValueError(f"t_eval={t_eval} must be >= 2 steps of dt={dt}")
        r = grid_radii(spec, grid)
        H = solve_hitting_ode(sp, grid).values
        S_lo, S_mid, S_hi = run_survival(
            sm, grid, [t_eval - dt, t_eval, t_eval + dt], startup_halfsteps
        )
        W = Field(r, S_mid.values * H, t_eval)
        dWdt = (S_hi.values - S_lo.values) * H / (2.0 * dt)
        override = None
        if drift_perturbation is not None:
            ri = r[1:-1]
            geom = spec.diffusion * (spec.d - 1) / ri if spec.d > 1 else 0.0
            pot = sp.drift_sign * sp.drift_strength * drift_perturbation(ri)
            override = geom + pot / ri ** (spec.d - 1)
        LW = operator_apply(sp, grid, W, "backward", override).values
        mask = (r >= window[0]) & (r <= window[1])
        mask[0] = mask[-1] = False
        norms.append(float(np.max(np.abs(LW[mask] - dWdt[mask]))))

    ratios = tuple(norms[i] / norms[i + 1] for i in range(len(norms) - 1))
    converged = all(ratio_band[0] <= q <= ratio_band[1] for q in ratios)
    return Theorem1Result(
        levels=tuple((g.n_cells, g.dt) for g in grids),
        residual_norms=tuple(norms),
        ratios=ratios,
        window=tuple(window),
        t_eval=t_eval,
        ratio_band=tuple(ratio_band),
        converged=converged,
    )


@dataclass(frozen=True)
class PropositionResult:
    mode: str
    levels: tuple
    residual_norms: tuple
    ratios: tuple
    ratio_band: tuple
    converged: bool
    finest_residual: float

    @property
    def verdict(self):
        return PASS if self.converged else FAIL

    @property
    def passed(self):
        return self.converged


def _stationary_residual(diffusion, sigma, n, domain, x_ref, sigma_injected):
    """Max-norm forward-equation residual of the stationary profile u0."""
    x = np.linspace(domain[0], domain[1], n + 1)
    h = (domain[1] - domain[0]) / n
    u = np.exp(sigma * (x - x_ref) / diffusion)
    if sigma_injected is None:
        sig = np.full_like(x, sigma)
    else:
        sig = np.asarray(sigma_injected(x), dtype=float)
    # conservative stencil of D u'' - (sigma(x) u)'
    flux = sig * u
    res = (
        diffusion * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h ** 2
        - (flux[2:] - flux[:-2]) / (2.0 * h)
    )
    return float(np.max(np.abs(res)))


def _stationary_residual_mp(diffusion, sigma, n, domain, x_ref, dps):
    """Same residual in extended precision.

    At n ~ 1e4 the float64 stencil is pure cancellation noise (the h^2
    residual sits below eps/h^2), so the tight finest-level threshold is
    checked with mpmath instead.  The profile is built by the exact
    recurrence u_{i+1} = u_i * e^(sigma h / D): one exponential, then
    products, all at `dps` digits.
    """
    with mpmath.workdps(dps):
        lo = mpmath.mpf(domain[0])
        hi = mpmath.mpf(domain[1])
        h = (hi - lo) / n
        step = mpmath.exp(mpmath.mpf(sigma) * h / diffusion)
        u = [mpmath.exp(mpmath.mpf(sigma) * (lo - x_ref) / diffusion)]
        for _ in range(n):
            u.append(u[-1] * step)
        worst = mpmath.mpf(0)
        for i in range(1, n):
            res = (
                diffusion * (u[i + 1] - 2 * u[i] + u[i - 1]) / h ** 2
                - sigma * (u[i + 1] - u[i - 1]) / (2 * h)
            )
            worst = max(worst, abs(res))
        return float(worst)


def _survival_residual(diffusion, sigma, n, dt, domain, x_ref, t_eval, startup_halfsteps):
    """Forward-equation residual of u0 * S at t_eval for the 1D inward drift."""
    lo, hi = domain
    spec = ProcessSpec(
        d=1,
        diffusion=diffusion,
        drift_strength=abs(sigma),
        drift_sign=-1 if sigma < 0 else 1,
        target_radius=lo,
        start_radius=0.5 * (lo + hi),
    )
    grid = GridSpec(r_max=hi, n_cells=n, dt=dt, t_end=t_eval + dt)
    S_lo, S_mid, S_hi = run_survival(
        spec, grid, [t_eval - dt, t_eval, t_eval + dt], startup_halfsteps
    )
    x = grid_radii(spec, grid)
    h = grid.spacing(spec)
    u0 = np.exp(sigma * (x - x_ref) / diffusion)
    u_lo, u_mid, u_hi = u0 * S_lo.values, u0 * S_mid.values, u0 * S_hi.values
    flux = sigma * u_mid
    res = (
        diffusion * (u_mid[2:] - 2.0 * u_mid[1:-1] + u_mid[:-2]) / h ** 2
        - (flux[2:] - flux[:-2]) / (2.0 * h)
        - (u_hi[1:-1] - u_lo[1:-1]) / (2.0 * dt)
    )
    win_lo, win_hi = default_window(spec, hi)
    xi = x[1:-1]
    mask = (xi >= win_lo) & (xi <= win_hi)
    return float(np.max(np.abs(res[mask])))


def check_proposition(
    diffusion,
    sigma,
    mode="stationary",
    levels=(256, 512, 1024, 2048),
    domain=(0.0, 1.0),
    x_ref=None,
    sigma_injected=None,
    precise_level=None,
    precise_dps=50,
    t_eval=0.5,
    startup_halfsteps=2,
    ratio_band=RATIO_BAND,
):
    """Refinement study of "backward solution times u0 solves forward".

    mode 'stationary' takes the trivial backward solution v = 1, so the
    candidate forward solution is u0 itself; `levels` are node counts
    and the residual of the conservative forward stencil must fall at
    O(h^2).  Passing `precise_level` appends one extended-precision
    evaluation (see _stationary_residual_mp) whose value lands in
    `finest_residual`; float64 could not resolve it.

    mode 'survival' takes v = the evolved 1D survival profile of the
    drift-sigma process; `levels` are (n_cells, dt) pairs refined
    together and the residual includes the centered time derivative.

    sigma_injected (stationary mode) replaces the drift field inside the
    stencil only: u0 still comes from the constant sigma, so any
    genuinely x-dependent injection breaks the statement and the
    residual stalls.  That is the negative control.
    """
    if diffusion <= 0.0:
        raise ValueError("diffusion must be positive")
    if x_ref is None:
        x_ref = domain[0]
    norms = []
    lvl = []
    if mode == "stationary":
        for n in levels:
            norms.append(
                _stationary_residual(diffusion, sigma, int(n), domain, x_ref, sigma_injected)
            )
            lvl.append(int(n))
    elif mode == "survival":
        for n, dt in levels:
            norms.append(
                _survival_residual(
                    diffusion, sigma, int(n), float(dt), domain, x_ref, t_eval,
                    startup_halfsteps,
                )
            )
            lvl.append((int(n), float(dt)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if len(norms) < 2:
        raise ValueError("need at least two refinement levels")

    finest = norms[-1]
    if precise_level is not None:
        if mode != "stationary":
            raise ValueError("extended precision applies to the stationary mode only")
        if sigma_injected is not None:
            raise ValueError("extended precision with an injected drift is not supported")
        finest = _stationary_residual_mp(
            diffusion, sigma, int(precise_level), domain, x_ref, precise_dps
        )
        lvl.append(int(precise_level))

    ratios = tuple(norms[i] / norms[i + 1] for i in range(len(norms) - 1))
    converged = all(ratio_band[0] <= q <= ratio_band[1] for q in ratios)
    return PropositionResult(
        mode=mode,
        levels=tuple(lvl),
        residual_norms=tuple(norms),
        ratios=ratios,
        ratio_band=tuple(ratio_band),
        converged=converged,
        finest_residual=float(finest),
    )


@dataclass(frozen=True)
class DualityReport:
    """Bundle of whichever checks were run, ready for serialization.

    pass_flags maps check name to PASS / FAIL / INF-REGIME and is
    derived from the stored verdicts, never set independently.
    """

    ks: KSVerdict = None
    mean: MeanDualityVerdict = None
    theorem1: Theorem1Result = None
    proposition: PropositionResult = None

    @property
    def pass_flags(self):
        flags = {}
        if self.ks is not None:
            flags["distribution"] = self.ks.verdict
        if self.mean is not None:
            flags["mean"] = self.mean.verdict
        if self.theorem1 is not None:
            flags["theorem1"] = self.theorem1.verdict
        if self.proposition is not None:
            flags["proposition"] = self.proposition.verdict
        return flags

    @property
    def all_ok(self):
        """True when every requested check passed or hit the infinite regime."""
        return all(v != FAIL for v in self.pass_flags.values())

    def to_json_dict(self):
        """Plain-python dict for json.dump; INFINITE becomes "infinite"."""

        def num(value):
            if value is INFINITE:
                return "infinite"
            return value

        out = {"pass_flags": self.pass_flags}
        if self.ks is not None:
            out["ks_statistic"] = self.ks.statistic
            out["ks_critical"] = self.ks.critical
            out["ks_alpha"] = self.ks.alpha
            out["ks_n_plus"] = self.ks.n_plus
            out["ks_n_minus"] = self.ks.n_minus
            out["ks_drift_matched"] = self.ks.drift_matched
        if self.mean is not None:
            out["mean_engine"] = self.mean.engine
            out["mean_plus_conditioned"] = num(self.mean.mean_plus_conditioned)
            out["mean_minus"] = num(self.mean.mean_minus)
            out["mean_diff_se_units"] = self.mean.diff_in_units
        if self.theorem1 is not None:
            out["theorem1_levels"] = [list(l) for l in self.theorem1.levels]
            out["theorem1_residual_norms"] = list(self.theorem1.residual_norms)
            out["theorem1_ratios"] = list(self.theorem1.ratios)
            out["theorem1_ratio_band"] = list(self.theorem1.ratio_band)
        if self.proposition is not None:
            out["proposition_mode"] = self.proposition.mode
            out["proposition_residual_norms"] = list(self.proposition.residual_norms)
            out["proposition_ratios"] = list(self.proposition.ratios)
            out["proposition_residual"] = self.proposition.finest_residual
        return out
