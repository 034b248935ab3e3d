"""Laguerre cells of a potential and the exact (unsmoothed) dual calculus.

For quadratic cost on the line, the Laguerre cell of Dirac i under a
potential psi is the interval between the weighted bisectors with its
neighbors; intersecting with the ball of radius sqrt(psi_i) around y_i
gives the restricted cell actually served by Dirac i in the partial
problem.  The dual functional is concave, piecewise smooth, and its
one-sided directional derivatives admit closed forms with a tridiagonal
generalized Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import Density1D
from .tridiag import TridiagSym


@dataclass(frozen=True)
class SortedDiracs:
    """Strictly increasing Dirac positions with positive weights.

    source_mass is the total mass of the density the Diracs will be
    transported from; the untransported slack alpha_inf must be positive.
    """

    y: np.ndarray
    alpha: np.ndarray
    source_mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "y", np.ascontiguousarray(self.y, dtype=float))
        object.__setattr__(self, "alpha", np.ascontiguousarray(self.alpha, dtype=float))
        if self.y.ndim != 1 or self.y.size == 0 or self.y.shape != self.alpha.shape:
            raise ValueError("y and alpha must be matching nonempty vectors")
        if self.y.size > 1 and not np.all(np.diff(self.y) > 0.0):
            raise ValueError("Dirac positions must be strictly increasing")
        if not np.all(self.alpha > 0.0):
            raise ValueError("Dirac weights must be positive")
        if not self.alpha_inf > 0.0:
            raise ValueError("total Dirac mass must be below the source mass")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def alpha_total(self) -> float:
        return float(self.alpha.sum())

    @property
    def alpha_min(self) -> float:
        return float(self.alpha.min())

    @property
    def alpha_inf(self) -> float:
        return self.source_mass - self.alpha_total


@dataclass(frozen=True)
class CellLayout:
    """Restricted Laguerre cells [a_i, b_i] with their bisectors z.

    z has sentinel -inf / +inf entries at both ends; a and b are the
    unclamped cell endpoints (they may stick out of the density support;
    mass integration clamps).  Cells with psi_i <= 0 or inverted bisectors
    are empty and stored as the degenerate interval [y_i, y_i].
    """

    z: np.ndarray
    a: np.ndarray
    b: np.ndarray
    in_domain: bool
    inactive_mass: float


def laguerre_boundaries(y, psi) -> np.ndarray:
    """Interior weighted bisectors z_i between consecutive Diracs."""
    y = np.asarray(y, dtype=float)
    psi = np.asarray(psi, dtype=float)
    dy = np.diff(y)
    return 0.5 * (y[:-1] + y[1:]) - np.diff(psi) / (2.0 * dy)


def layout(d: Density1D, diracs: SortedDiracs, psi) -> CellLayout:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != diracs.y.shape:
        raise ValueError("psi length mismatch")
    y = diracs.y
    z = np.concatenate([[-np.inf], laguerre_boundaries(y, psi), [np.inf]])
    r = np.sqrt(np.maximum(psi, 0.0))
    a = np.maximum(z[:-1], y - r)
    b = np.minimum(z[1:], y + r)
    empty = (psi <= 0.0) | (b <= a)
    a = np.where(empty, y, a)
    b = np.where(empty, y, b)

    g = d.interval_mass(a, b)
    l, u = d.support
    if np.all(np.diff(z) >= 0.0):
        # cells are pairwise disjoint: integrate the gaps directly
        occupied = ~empty
        inactive = d.total_mass
        if np.any(occupied):
            ao, bo = a[occupied], b[occupied]
            inactive = float(
                d.interval_mass(l, ao[0])
                + d.interval_mass(bo[:-1], ao[1:]).sum()
                + d.interval_mass(bo[-1], u)
            )
    else:
        inactive = float(d.total_mass - g.sum())
    in_domain = bool(np.all(g > 0.0) and inactive > 0.0)
    return CellLayout(z=z, a=a, b=b, in_domain=in_domain, inactive_mass=inactive)


def masses(d: Density1D, lay: CellLayout) -> np.ndarray:
    """Mass transported to each Dirac: rho-measure of its restricted cell."""
    return d.interval_mass(lay.a, lay.b)


def dual_value(d: Density1D, diracs: SortedDiracs, psi) -> float:
    """Kantorovich dual K(psi) of the partial transport problem."""
    psi = np.asarray(psi, dtype=float)
    lay = layout(d, diracs, psi)
    m0, _, m2 = d.moments(lay.a, lay.b, diracs.y)
    return float(np.sum(m2 - psi * m0) + np.dot(diracs.alpha, psi))


def barycenters(d: Density1D, lay: CellLayout) -> np.ndarray:
    """rho-barycenter of each restricted cell; NaN where the cell has no mass."""
    mid = 0.5 * (np.clip(lay.a, *d.support) + np.clip(lay.b, *d.support))
    m0, m1, _ = d.moments(lay.a, lay.b, mid)
    out = np.full(m0.shape, np.nan)
    pos = m0 > 0.0
    out[pos] = mid[pos] + m1[pos] / m0[pos]
    return out


def _pdf_moving(d: Density1D, x, rate):
    """Density seen by endpoints moving at the given rates (one-sided)."""
    out = d.pdf(x, side=0)
    pos, neg = rate > 0.0, rate < 0.0
    if np.any(pos):
        out = np.where(pos, d.pdf(x, side=1), out)
    if np.any(neg):
        out = np.where(neg, d.pdf(x, side=-1), out)
    return out


def directional_derivative(d: Density1D, diracs: SortedDiracs, psi, v):
    """One-sided derivative of the cell masses along v, with its Jacobian.

    Returns (dG, H) where dG[i] is the unilateral directional derivative of
    the i-th cell mass at psi in direction v and H is a symmetric weakly
    diagonally dominant tridiagonal matrix with dG = H v.  One-sided
    derivatives exist wherever every cell carries positive mass (the
    inactive region may be empty); outside that set the masses are not
    even one-sidedly differentiable and the call fails.  At a
    configuration where a bisector meets a ball edge exactly, the branch
    is chosen by the max/min rules of the cell endpoints, reading
    coefficients from the ball term on a rate tie.
    """
    psi = np.asarray(psi, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != psi.shape or psi.shape != diracs.y.shape:
        raise ValueError("psi and v must match the Dirac count")
    lay = layout(d, diracs, psi)
    if not np.all(masses(d, lay) > 0.0):
        raise ValueError("outside differentiability domain")
    n = diracs.n
    r = np.sqrt(psi)
    dy = np.diff(diracs.y)

    # Whether consecutive cells share a bisector endpoint ("wall") or end at
    # their own ball edges is a single condition per boundary: the balls
    # touch or overlap iff dy <= r_i + r_{i+1}.  Deciding it per boundary
    # (not per side) keeps the Jacobian exactly symmetric.  At a geometric
    # tie the endpoint rates are min/max of the two branch rates, and one
    # shared choice realizes both (the orderings that would need a mixed
    # choice are mutually exclusive); an exact rate tie falls to the ball
    # term by the strict comparison.
    gap = dy - (r[:-1] + r[1:])
    wall_rate = -np.diff(v) / (2.0 * dy)
    wall = gap < 0.0
    tie = gap == 0.0
    if np.any(tie):
        wall = wall | (tie & (wall_rate < v[:-1] / (2.0 * r[:-1])))

    da = -v / (2.0 * r)
    db = v / (2.0 * r)
    if n > 1:
        da[1:] = np.where(wall, wall_rate, da[1:])
        db[:-1] = np.where(wall, wall_rate, db[:-1])

    rho_a = _pdf_moving(d, lay.a, da)
    rho_b = _pdf_moving(d, lay.b, db)
    dg = rho_b * db - rho_a * da

    diag = np.zeros(n)
    off = np.zeros(max(n - 1, 0))
    ca = np.empty(n)  # coefficient of v_i in -rho_a * da
    ca[0] = rho_a[0] / (2.0 * r[0])
    cb = np.empty(n)  # coefficient of v_i in rho_b * db
    cb[-1] = rho_b[-1] / (2.0 * r[-1])
    if n > 1:
        ca[1:] = np.where(wall, rho_a[1:] / (2.0 * dy), rho_a[1:] / (2.0 * r[1:]))
        cb[:-1] = np.where(wall, rho_b[:-1] / (2.0 * dy), rho_b[:-1] / (2.0 * r[:-1]))
        off = np.where(wall, -rho_b[:-1] / (2.0 * dy), 0.0)
    diag = ca + cb
    return dg, TridiagSym(diag, off)
