"""The two operator-level checks behind the duality harness.

First the product identity: if S solves the backward evolution and H is
the stationary hitting factor, then W = S * H solves the forward one.
The discrete residual of that identity falls at second order, and an
injected perturbation of the drift makes it stall, which is the whole
point: the harness can tell a correct operator pair from a broken one.

Second the constant-coefficient conversion identity on an interval,
where extended-precision arithmetic can push the residual to zero.
"""

import numpy as np

from fpduality.duality import check_proposition, check_theorem1_residual
from fpduality.model import GridSpec, ProcessSpec
from fpduality.numeric import operator_matrix

ball = ProcessSpec(d=3, diffusion=1.0, drift_strength=1.0, drift_sign=1,
                   target_radius=1.0, start_radius=2.0)

# discrete adjointness: the forward stencil is the weighted transpose of
# the backward one, down to roundoff
grid = GridSpec(r_max=9.0, n_cells=64, dt=0.01, t_end=1.0)
B = operator_matrix(ball, grid, which="backward")
F = operator_matrix(ball, grid, which="forward")
w = np.linspace(1.0, 9.0, 65) ** 2
defect = np.abs(F - np.diag(1.0 / w) @ B.T @ np.diag(w))[1:-1, 1:-1].max()
print(f"weighted-transpose defect: {defect:.2e} "
      f"(entries of size {np.abs(B).max():.0f})")

levels = [GridSpec(7.0, 96 * 2**k, 1.0 / (32 * 2**k), 2.0) for k in range(4)]
res = check_theorem1_residual(ball, levels, t_eval=1.0)
print("\nproduct identity, residual ladder:")
for grid_k, norm in zip(levels, res.residual_norms):
    print(f"  n={grid_k.n_cells:<5d} |residual| = {norm:.3e}")
print("  reduction factors:", ", ".join(f"{q:.2f}" for q in res.ratios),
      f"-> {res.verdict}")

bent = check_theorem1_residual(
    ball, levels[:3], t_eval=1.0,
    drift_perturbation=lambda rr: 1.0 + 0.5 * np.sin(rr - 1.0),
)
print("  with bent drift:", ", ".join(f"{n:.1e}" for n in bent.residual_norms),
      f"-> {bent.verdict}")

print("\nconversion identity (stationary, constant coefficients):")
prop = check_proposition(1.0, -1.0)
for n, norm in zip(prop.levels, prop.residual_norms):
    print(f"  n={n:<6d} |residual| = {norm:.3e}")
prop50 = check_proposition(1.0, -1.0, levels=(256, 512), precise_level=32768)
print(f"  at 50 digits, n=32768: {prop50.finest_residual:.3e}")

inj = check_proposition(1.0, -1.0, levels=(256, 512, 1024),
                        sigma_injected=lambda x: x)
print(f"  injected sigma(x)=x: stuck at {inj.residual_norms[-1]:.3e} "
      f"-> {inj.verdict}")
