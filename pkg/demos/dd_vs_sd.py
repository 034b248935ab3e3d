"""Compare discrete-discrete matching against the semi-discrete solver.

Replacing the hat density by m quantile samples and solving the monotone
matching DP approximates the continuous partial transport; the per-Dirac
barycenters converge to the semi-discrete ones as m grows, while the DP
cost grows like O(N m) per run.
"""

import time

import numpy as np

from usdot.cells import SortedDiracs, layout
from usdot.ddot import dd_partial_transport, discretize
from usdot.density import hat
from usdot.solver import solve_unregularized

d = hat(-1.0, 1.0)
rng = np.random.default_rng(5)
y = np.sort(rng.uniform(-0.9, 0.9, 100))
diracs = SortedDiracs(y, np.full(100, 0.75 / 100))

t0 = time.perf_counter()
rep = solve_unregularized(d, diracs)
sd_time = time.perf_counter() - t0
lay = layout(d, diracs, rep.psi)
m0, m1, _ = d.moments(lay.a, lay.b, 0.0)
bary_sd = m1 / m0
print(f"semi-discrete reference: {rep.status} in {sd_time:.3f}s "
      f"({rep.iterations} Newton steps)\n")

print(f"{'m':>7} {'barycenter rms err':>20} {'wall':>8}")
for m in (100, 1000, 10000):
    t0 = time.perf_counter()
    sinks = discretize(d, m)
    # each Dirac sends round(alpha_i * m) unit samples into the sink cloud
    k = np.maximum(1, np.round(diracs.alpha * m / d.total_mass).astype(int))
    sources = np.repeat(diracs.y, k)
    res = dd_partial_transport(sources, sinks)
    owner = np.repeat(np.arange(diracs.n), k)
    bary_dd = np.bincount(owner, weights=sinks[res.assignment]) / k
    dt = time.perf_counter() - t0
    err = np.sqrt(np.mean((bary_dd - bary_sd) ** 2))
    print(f"{m:7d} {err:20.3e} {dt:7.3f}s")

print("\nthe empirical barycenters home in on the continuous ones at the")
print("usual Monte-Carlo-free quantile rate; runtime scales linearly in m")
