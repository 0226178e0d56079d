"""Closed forms: densities, hitting probabilities, mean first-passage times.

These are the oracles against which the Monte Carlo and finite-difference
engines are checked.  All formulas are elementary; the only subtlety worth
spelling out is the distinction between two stationary solutions of the
backward equation for d > 2:

* `hitting_probability` returns the pure exponential solution whose log
  derivative is -sigma / r^(d-1).  It is the weight that converts between
  the two drift signs (dividing the outward first-passage density by it
  gives the inward one exactly), and for d <= 2 it coincides with the
  probability of ever hitting the target.
* `prob_ever_hits` returns the solution that vanishes at infinity, which
  is the actual probability that the simulated process reaches the
  target.  For d > 2 the two differ because the exponential solution
  tends to a positive constant at infinity.

Monte Carlo hit fractions must be compared against `prob_ever_hits` (or
`two_boundary_hit_probability` when the escape radius matters); the
duality checks use `hitting_probability`.
"""

import enum
import math

from scipy.integrate import quad

__all__ = [
    "MeanFPT",
    "INFINITE",
    "UnsupportedClosedFormError",
    "TransientMeanError",
    "occupation_density_1d",
    "fp_density_1d",
    "fp_cdf_1d",
    "fp_density_mass",
    "hitting_probability",
    "prob_ever_hits",
    "two_boundary_hit_probability",
    "hitting_probability_derivative",
    "mean_fpt",
    "is_recurrent",
    "u0_factor",
    "u0_factor_integral",
]


class MeanFPT(enum.Enum):
    """Distinguished non-numeric mean first-passage results."""

    INFINITE = "infinite"


INFINITE = MeanFPT.INFINITE


class UnsupportedClosedFormError(ValueError):
    """No closed form exists for the requested quantity; use the solvers."""


class TransientMeanError(ValueError):
    """Transient process: the unconditioned mean first-passage time is undefined."""


def _require_1d_at_origin(spec):
    if spec.d != 1:
        raise ValueError("closed form is one-dimensional (d must be 1)")
    if spec.target_radius != 0.0:
        raise ValueError("closed form assumes the absorbing point at the origin")


def _gauss(y, var):
    return math.exp(-y * y / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def occupation_density_1d(spec, x, t):
    """Density of the not-yet-absorbed particle on the half line at time t.

    Image construction: a Gaussian launched from x0 drifting with the
    signed velocity s = drift_sign * drift_strength, minus a mirror
    Gaussian from -x0 weighted by exp(-s x0 / D).  That weight is the one
    that makes the two terms cancel identically at x = 0, so the
    absorbing condition holds exactly (which the tests assert).

    Parameters
    ----------
    spec : ProcessSpec with d = 1 and target_radius = 0
    x : position >= 0
    t : time > 0
    """
    _require_1d_at_origin(spec)
    if t <= 0.0:
        raise ValueError("t must be > 0")
    if x < 0.0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return 0.0
    D = spec.diffusion
    x0 = spec.start_radius
    s = spec.drift_sign * spec.drift_strength
    var = 2.0 * D * t
    direct = _gauss(x - x0 - s * t, var)
    image = math.exp(-s * x0 / D) * _gauss(x + x0 - s * t, var)
    return max(direct - image, 0.0)


def fp_density_1d(spec, t):
    """First-passage density at the origin, f(t), for the 1D process.

    f(t) = x0 / sqrt(4 pi D t^3) * exp(-(x0 + sign*v*t)^2 / (4 D t)).
    A positive drift sign makes the density defective (total mass < 1).
    Works for any target_radius via the distance x0 = r0 - a.
    """
    if spec.d != 1:
        raise ValueError("closed form is one-dimensional (d must be 1)")
    if t <= 0.0:
        raise ValueError("t must be > 0")
    D = spec.diffusion
    x0 = spec.distance_to_target()
    shift = x0 + spec.drift_sign * spec.drift_strength * t
    return x0 / math.sqrt(4.0 * math.pi * D * t ** 3) * math.exp(
        -shift * shift / (4.0 * D * t)
    )


def _Phi(y):
    return 0.5 * math.erfc(-y / math.sqrt(2.0))


def fp_cdf_1d(spec, t):
    """Probability the 1D process has hit the target by time t.

    Inverse-Gaussian distribution function with signed drift
    s = drift_sign * drift_strength:

        F(t) = Phi((-s t - x0)/sqrt(2 D t)) + e^{-s x0/D} Phi((s t - x0)/sqrt(2 D t))

    For t -> infinity this tends to 1 for s <= 0 and to e^{-s x0/D}
    (the hitting probability) for s > 0.
    """
    if spec.d != 1:
        raise ValueError("closed form is one-dimensional (d must be 1)")
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return 0.0
    D = spec.diffusion
    x0 = spec.distance_to_target()
    s = spec.drift_sign * spec.drift_strength
    sd = math.sqrt(2.0 * D * t)
    return _Phi((-s * t - x0) / sd) + math.exp(-s * x0 / D) * _Phi((s * t - x0) / sd)


def fp_density_mass(spec, epsabs=1e-8):
    """Quadrature of fp_density_1d over (0, infinity).

    Uses the substitution t = s/(1-s) to map the infinite horizon onto
    (0, 1); the integrand has heavy tails when the drift vanishes, which
    the mapping plus adaptive subdivision handles.  Equals the hitting
    probability up to quadrature tolerance (a test asserts this).
    """

    def integrand(s):
        t = s / (1.0 - s)
        return fp_density_1d(spec, t) / (1.0 - s) ** 2

    value, _ = quad(integrand, 0.0, 1.0, epsabs=epsabs, limit=200)
    return value


def _g_exponent(spec, r):
    """g(r) = (v/D)/(d-2) * r^(2-d), the exponent of the d > 2 closed forms."""
    return spec.sigma_reduced / (spec.d - 2) * r ** (2 - spec.d)


def hitting_probability(spec, r=None):
    """Closed-form hitting factor H(r) used by the sign-flip duality.

    By convention this returns exactly 1 for drift_sign = -1 (and at
    r = target_radius).  For the outward sign:

    * d = 1 : exp(-(v/D) (r - a))
    * d = 2 : (r / a)^(-v/D)
    * d > 2 : exp[(v/D)/(d-2) (r^(2-d) - a^(2-d))]

    For d <= 2 this is the probability of ever hitting the target.  For
    d > 2 it is not (it does not vanish at infinity); it is the
    stationary backward solution whose derivative is
    -(v/D) r^(1-d) H(r), which is what the duality needs.  Use
    `prob_ever_hits` for the actual hit probability of the process.
    """
    if r is None:
        r = spec.start_radius
    if spec.drift_sign < 0:
        return 1.0
    D = spec.diffusion
    v = spec.drift_strength
    a = spec.target_radius
    if spec.d == 1:
        return math.exp(-(v / D) * (r - a))
    if spec.d == 2:
        return (r / a) ** (-v / D)
    return math.exp(_g_exponent(spec, r) - _g_exponent(spec, a))


def prob_ever_hits(spec, r=None):
    """Probability that the process started at radius r ever hits the target.

    This is the stationary backward solution with value 1 on the target
    and 0 at infinity.  It equals `hitting_probability` for d <= 2, and
    equals 1 whenever the process is recurrent (inward drift in d <= 2,
    or no drift in d <= 2).  For d >= 3 the process is transient for both
    drift signs (the geometric outward drift wins at large radii), so the
    value is below 1 even for inward drift.
    """
    if r is None:
        r = spec.start_radius
    a = spec.target_radius
    if spec.d <= 2:
        if spec.drift_sign < 0 or spec.drift_strength == 0.0:
            return 1.0
        return hitting_probability(spec, r)
    if spec.drift_strength == 0.0:
        return (a / r) ** (spec.d - 2)
    g_r = _g_exponent(spec, r)
    g_a = _g_exponent(spec, a)
    if spec.drift_sign > 0:
        return math.expm1(g_r) / math.expm1(g_a)
    return -math.expm1(-g_r) / -math.expm1(-g_a)


def _scale_solution(spec, rho):
    """Non-constant solution of the stationary backward equation.

    Together with the constants it spans all stationary backward
    solutions; two-boundary hit probabilities are ratios of differences
    of this function.
    """
    s = spec.drift_sign
    sig = spec.sigma_reduced
    if spec.d == 1:
        return rho if sig == 0.0 else math.exp(-s * sig * rho)
    if spec.d == 2:
        return math.log(rho) if sig == 0.0 else rho ** (-s * sig)
    if sig == 0.0:
        return rho ** (2 - spec.d)
    return math.exp(s * _g_exponent(spec, rho))


def two_boundary_hit_probability(spec, r_outer, r=None):
    """Probability of hitting the target before reaching radius r_outer.

    Exact for the continuous process; this is what a Monte Carlo hit
    fraction with escape censoring converges to (up to the time-horizon
    tail), so tests compare against it rather than against the
    one-boundary limits.
    """
    if r is None:
        r = spec.start_radius
    a = spec.target_radius
    if not (a <= r <= r_outer) or r_outer <= a:
        raise ValueError("need target_radius <= r <= r_outer")
    chi_r = _scale_solution(spec, r)
    chi_a = _scale_solution(spec, a)
    chi_R = _scale_solution(spec, r_outer)
    return (chi_r - chi_R) / (chi_a - chi_R)


def hitting_probability_derivative(spec, r):
    """Radial derivative of the d > 2 hitting factor: -(v/D) r^(1-d) H(r).

    Only defined for the outward drift sign and d > 2 (the 1D and 2D
    factors are differentiated where needed inline).
    """
    if spec.d <= 2:
        raise UnsupportedClosedFormError("derivative identity is for d > 2")
    if spec.drift_sign < 0:
        raise ValueError("derivative identity applies to the outward drift sign")
    if r < spec.target_radius:
        raise ValueError("r must be >= target_radius")
    return -(spec.sigma_reduced / r ** (spec.d - 1)) * hitting_probability(spec, r)


def is_recurrent(spec):
    """True if the process hits the target with probability one.

    The potential drift decays like (a/rho)^(d-1), so for d >= 3 the
    geometric repulsion wins at large radius no matter the sign and the
    process is transient (prob_ever_hits < 1).  For d <= 2 the sign
    decides, with the driftless process recurrent.
    """
    if spec.d >= 3:
        return False
    return spec.drift_sign < 0 or spec.drift_strength == 0.0


def mean_fpt(spec, conditioned=False):
    """Mean first-passage time to the target, or INFINITE.

    Closed forms exist for d = 1 (x0 / v) and d = 2
    ((r0^2 - a^2) / (2 (v - 2D)) when v > 2D, infinite otherwise; both
    have units of time, e.g. 0.75 for D=1, v=4, a=1, r0=2).

    conditioned=True asks for the mean over paths that do hit.  For the
    outward sign that equals the inward-sign unconditioned mean (the
    duality); for the inward sign the flag changes nothing.  Requesting
    the unconditioned mean of a transient (outward, v > 0) process raises
    TransientMeanError; infinite means are returned as the INFINITE
    sentinel, never as float('inf').
    """
    if spec.d > 2:
        raise UnsupportedClosedFormError(
            "no closed-form mean for d > 2; use numeric.solve_mean_fpt_ode"
        )
    v = spec.drift_strength
    if spec.drift_sign > 0 and v > 0.0 and not conditioned:
        raise TransientMeanError("transient: unconditioned mean undefined")
    if spec.d == 1:
        if v == 0.0:
            return INFINITE
        return spec.distance_to_target() / v
    D = spec.diffusion
    if v <= 2.0 * D:
        return INFINITE
    a = spec.target_radius
    r0 = spec.start_radius
    return (r0 * r0 - a * a) / (2.0 * (v - 2.0 * D))


def u0_factor(diffusion, sigma, x_ref, x):
    """Stationary forward-equation factor for constant coefficients.

    exp(sigma (x - x_ref) / D), normalized to 1 at x_ref.  Multiplying a
    backward-equation solution by this factor produces a forward-equation
    solution; with hitting boundary conditions it is the hitting factor
    itself.  `sigma` is the signed drift of the forward operator
    (D u)'' - (sigma u)'.
    """
    return math.exp(sigma * (x - x_ref) / diffusion)


def u0_factor_integral(diffusion_fn, sigma_fn, x_ref, x, diffusion_prime_fn=None, epsabs=1e-10):
    """General integral form of the stationary factor.

    u0(x) = exp[ integral_{x_ref}^{x} (sigma(s) - D'(s)) / D(s) ds ]

    Exposed for completeness; the package only exercises it with constant
    coefficients, where it reduces to `u0_factor` (non-constant
    coefficients are exactly the regime where the duality breaks, which
    the negative controls demonstrate).  D' may be supplied; it defaults
    to zero (constant diffusion).
    """
    if diffusion_prime_fn is None:
        diffusion_prime_fn = lambda s: 0.0

    def integrand(s):
        return (sigma_fn(s) - diffusion_prime_fn(s)) / diffusion_fn(s)

    value, _ = quad(integrand, x_ref, x, epsabs=epsabs, limit=200)
    return math.exp(value)
