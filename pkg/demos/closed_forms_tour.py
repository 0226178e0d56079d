"""Tour of the closed forms: densities, hitting factors, means.

Everything here is pencil-and-paper math evaluated numerically, no
simulation and no grids.  Run it to see the numbers the rest of the
package is tested against.
"""

import math

from fpduality.analytic import (
    INFINITE,
    fp_cdf_1d,
    fp_density_1d,
    hitting_probability,
    mean_fpt,
    prob_ever_hits,
)
from fpduality.model import ProcessSpec

line_out = ProcessSpec(d=1, diffusion=1.0, drift_strength=1.0, drift_sign=1,
                       target_radius=0.0, start_radius=1.0)
line_in = line_out.with_sign(-1)

print("=== d = 1, unit drift, start at x0 = 1 ===")
print(f"P(ever hits | outward drift) = {hitting_probability(line_out):.6f}"
      f"   (exp(-1) = {math.exp(-1):.6f})")
print(f"P(ever hits | inward drift)  = {prob_ever_hits(line_in):.6f}")

# the sign-flip duality in its rawest form: the ratio of the two hit-time
# densities is constant in t, and the constant is the hitting factor
print("\nt        f_out(t)    f_in(t)     ratio")
for t in (0.25, 0.5, 1.0, 2.0, 4.0):
    f_out = fp_density_1d(line_out, t)
    f_in = fp_density_1d(line_in, t)
    print(f"{t:<8} {f_out:<11.6f} {f_in:<11.6f} {f_out / f_in:.6f}")

print("\nconditioned medians agree as well:")
for spec, name in ((line_out, "outward"), (line_in, "inward")):
    h = hitting_probability(spec)
    # bisect F(t)/H = 1/2
    lo, hi = 1e-6, 50.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if fp_cdf_1d(spec, mid) / h < 0.5:
            lo = mid
        else:
            hi = mid
    print(f"  {name:<8} median = {0.5 * (lo + hi):.6f}")

print("\n=== mean first-passage times ===")
disc = ProcessSpec(d=2, diffusion=1.0, drift_strength=4.0, drift_sign=-1,
                   target_radius=1.0, start_radius=2.0)
print(f"d=2, v=4 inward from r0=2:  T = {mean_fpt(disc):.6f}"
      "   ((r0^2 - a^2) / (2(v - 2D)) = 0.75)")
print(f"d=2, v=4 outward, conditioned: "
      f"{mean_fpt(disc.with_sign(1), conditioned=True):.6f}  (the dual pair)")

weak = ProcessSpec(d=2, diffusion=1.0, drift_strength=2.0, drift_sign=-1,
                   target_radius=1.0, start_radius=2.0)
m = mean_fpt(weak)
print(f"d=2, v=2D inward:  T = {'infinite' if m is INFINITE else m}"
      "   (the heavy-tail boundary: hits almost surely, mean diverges)")

print("\n=== d = 3: the hitting factor is not a probability ===")
ball = ProcessSpec(d=3, diffusion=1.0, drift_strength=1.0, drift_sign=1,
                   target_radius=1.0, start_radius=2.0)
H = hitting_probability(ball)
p_out = prob_ever_hits(ball)
p_in = prob_ever_hits(ball.with_sign(-1))
print(f"duality factor H(2)        = {H:.6f}   (exp(-1/2))")
print(f"P(ever hits | outward)     = {p_out:.6f}")
print(f"P(ever hits | inward)      = {p_in:.6f}   (transient even inward)")
print(f"H * P(inward)              = {H * p_in:.6f}   equals P(outward)")
