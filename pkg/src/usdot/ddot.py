"""Discrete-discrete partial transport on the line.

A density is turned into an empirical cloud by sampling its quantile
function at midpoints of a uniform grid, and the partial assignment of N
sorted sources into M >= N sorted sinks is found by dynamic programming:
an optimal monotone matching never crosses, so row i only extends the best
matching of the first i-1 sources into a prefix of the sinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import Density1D, _quantiles


def discretize(d: Density1D, m: int) -> np.ndarray:
    """Quantile midpoint sample: x_k = F^{-1}((k - 1/2)/m * total), k = 1..m.

    The quantile function is inverted in closed form piece by piece, so the
    sample is exact up to roundoff and costs O(m log P).
    """
    if m < 1:
        raise ValueError("need at least one sample point")
    return _quantiles(d, (np.arange(m) + 0.5) / m * d.total_mass)


@dataclass(frozen=True)
class AssignmentResult:
    """Monotone partial matching: source k goes to sinks[assignment[k]]."""

    assignment: np.ndarray
    cost: float


def dd_partial_transport(sources, sinks) -> AssignmentResult:
    """Minimum total squared distance injection of sources into sinks.

    Both inputs must be sorted nondecreasing, len(sources) <= len(sinks).
    Runs the O(N*M) prefix recursion with an N x M boolean backtrack table.
    """
    x = np.asarray(sources, dtype=float)
    t = np.asarray(sinks, dtype=float)
    n, m = x.size, t.size
    if n == 0:
        return AssignmentResult(np.empty(0, dtype=np.int64), 0.0)
    if n > m:
        raise ValueError("more sources than sinks")
    if np.any(np.diff(x) < 0.0) or np.any(np.diff(t) < 0.0):
        raise ValueError("sources and sinks must be sorted")

    # prev[j] = best cost of matching the first i-1 sources into sinks < j+1
    prev = np.zeros(m + 1)
    take = np.zeros((n, m + 1), dtype=bool)
    for i in range(1, n + 1):
        # candidate "match source i to sink j" for j = i..m
        cand = prev[i - 1 : m] + (x[i - 1] - t[i - 1 : m]) ** 2
        best = np.minimum.accumulate(cand)
        cur = np.full(m + 1, np.inf)
        cur[i:] = best
        skip = np.concatenate([[np.inf], best[:-1]])
        take[i - 1, i:] = cand <= skip
        prev = cur

    assign = np.empty(n, dtype=np.int64)
    j = m
    for i in range(n, 0, -1):
        while not take[i - 1, j]:
            j -= 1
        assign[i - 1] = j - 1
        j -= 1
    return AssignmentResult(assign, float(prev[m]))
