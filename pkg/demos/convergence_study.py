"""Measure the rate at which smoothed potentials approach the sharp ones.

Halving the strip width eps repeatedly and comparing every stage against a
near-sharp reference shows the quadratic bias of the thickening: the error
curve on a log-log plot is a straight line of slope close to 2.
"""

import numpy as np

from usdot.cells import SortedDiracs
from usdot.density import truncated_gaussian
from usdot.solver import SolverConfig, solve_with_continuation

d = truncated_gaussian(0.0, 1.0, -3.0, 3.0)
rng = np.random.default_rng(0)
y = np.sort(rng.uniform(-1.0, 1.0, 15))
diracs = SortedDiracs(y, np.full(15, 0.5 / 15))

eps_list = [0.2 * 2.0**-k for k in range(8)]
schedule = list(eps_list)
while schedule[-1] > 1e-4:
    schedule.append(max(0.5 * schedule[-1], 1e-4))

stages = solve_with_continuation(
    d, diracs, SolverConfig(eps=schedule[0], collect_diagnostics=False), schedule=schedule
)
psi_ref = stages[-1][1].psi
print(f"reference potential solved at eps = {stages[-1][0]:.1e} "
      f"({sum(r.iterations for _, r in stages)} Newton steps total)\n")

print(f"{'eps':>12} {'max |psi - psi_ref|':>22} {'iterations':>11}")
errs = []
for (e, rep) in stages[:8]:
    err = float(np.abs(rep.psi - psi_ref).max())
    errs.append(err)
    print(f"{e:12.6f} {err:22.3e} {rep.iterations:11d}")

slope = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
print(f"\nfitted log-log slope: {slope:.4f}  (quadratic bias -> 2)")
