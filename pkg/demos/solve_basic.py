"""Solve one semi-discrete partial transport problem and inspect the cells.

Source: a truncated Gaussian on [-3, 3].  Targets: seven Diracs carrying
60% of the source mass.  The solve runs at a fixed smoothing width, then
the script prints the restricted cell of every Dirac together with its
transported mass and barycenter.
"""

import numpy as np

from usdot.cells import SortedDiracs, barycenters, dual_value, layout, masses
from usdot.density import truncated_gaussian
from usdot.solver import SolverConfig, solve_regularized

d = truncated_gaussian(0.0, 1.0, -3.0, 3.0)
rng = np.random.default_rng(7)
y = np.sort(rng.uniform(-1.5, 1.5, 7))
alpha = rng.uniform(0.5, 1.0, 7)
alpha *= 0.6 / alpha.sum()
diracs = SortedDiracs(y, alpha)

cfg = SolverConfig(eps=0.05)
rep = solve_regularized(d, diracs, cfg)
print(f"status {rep.status} after {rep.iterations} Newton steps")
print(f"final residual {rep.residual_history[-1]:.3e}")
print(f"smoothed eigenvalue floor holds: {rep.diagnostics['lambda_ok']}")

lay = layout(d, diracs, rep.psi)
g = masses(d, lay)
bary = barycenters(d, lay)
print(f"\ndual value {dual_value(d, diracs, rep.psi):.9f}")
print(f"transported {g.sum():.6f} of {diracs.alpha_total:.6f} requested "
      f"({d.total_mass - g.sum():.6f} stays put)\n")

print(f"{'y':>9} {'alpha':>9} {'psi':>9} {'cell':>21} {'mass':>9} {'barycenter':>11}")
for i in range(diracs.n):
    cell = f"[{max(lay.a[i], -3.0):+.3f}, {min(lay.b[i], 3.0):+.3f}]"
    print(f"{y[i]:+9.4f} {alpha[i]:9.4f} {rep.psi[i]:9.4f} {cell:>21} "
          f"{g[i]:9.4f} {bary[i]:+11.4f}")

# each barycenter sits inside its cell, pulled toward the density's bulk
assert np.all(bary >= np.maximum(lay.a, -3.0)) and np.all(bary <= np.minimum(lay.b, 3.0))
