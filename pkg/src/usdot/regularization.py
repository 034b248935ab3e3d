"""Smoothed dual calculus via thickening of the source density.

Spreading the 1D density over a 2D strip of half-width eps replaces the
sharp cell indicator by the ramp (f_eps*)', where f*(t) has branches
0 / (2/3) t^{3/2} / t - 1/3 and f_eps*(t) = eps^2 f*(t / eps^2).  The
smoothed mass of cell i is then an integral over the plain Laguerre cell
(no restriction needed: the kernel vanishes outside the ball), the dual
functional becomes C^2 with a tridiagonal Hessian, and the eps-derivative
of the masses has a closed reduced form (see docs/eps-derivative.md).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import SortedDiracs, laguerre_boundaries
from .density import Density1D, _cell_segments, _segment_values
from .tridiag import TridiagSym


@dataclass(frozen=True)
class RegParams:
    """Thickening width together with the instance's a priori bounds.

    r and R bound sqrt(psi) at the smoothed optimum whenever eps < eps0 and
    the density is bounded away from zero on its support; eps0 = min(1, r).
    """

    eps: float
    r: float
    R: float
    eps0: float

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")

    @classmethod
    def from_problem(cls, d: Density1D, diracs: SortedDiracs, eps: float) -> "RegParams":
        l, u = d.support
        lo = min(l, float(diracs.y.min()))
        hi = max(u, float(diracs.y.max()))
        diam = hi - lo
        r = diracs.alpha_min / (2.0 * d.rho_max)
        return cls(eps=eps, r=r, R=float(np.sqrt(1.0 + diam * diam)), eps0=min(1.0, r))


def fstar(t, order: int = 0):
    """The smoothing profile f*(t) (order 0) and its first two derivatives.

    f* is the convex conjugate of t^3/3 restricted to [0, 1]: zero for
    t < 0, (2/3) t^{3/2} on [0, 1], and t - 1/3 beyond.  Its derivative is
    min(sqrt(t), 1) for t > 0; the second derivative lives on (0, 1) only.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    tp = np.maximum(t, 0.0)
    if order == 0:
        out = np.where(t <= 0.0, 0.0, np.where(t <= 1.0, (2.0 / 3.0) * tp**1.5, t - 1.0 / 3.0))
    elif order == 1:
        out = np.where(t <= 0.0, 0.0, np.minimum(np.sqrt(tp), 1.0))
    elif order == 2:
        inside = (t > 0.0) & (t < 1.0)
        out = np.where(inside, 0.5 / np.sqrt(np.where(inside, tp, 1.0)), 0.0)
    else:
        raise ValueError("order must be 0, 1, or 2")
    return float(out[0]) if scalar else out


def _assemble(d: Density1D, diracs: SortedDiracs, psi, eps: float, want):
    """Shared evaluation of the smoothed quantities over the Laguerre cells.

    want is a set drawn from {"g", "value", "hess", "deps"}.  Returns a dict
    with keys among g, kint (sum of the smoothed positive-part integrals),
    hdiag, off, deps.
    """
    psi = np.asarray(psi, dtype=float)
    y = diracs.y
    n = diracs.n
    l, u = d.support
    z = laguerre_boundaries(y, psi)
    wl = np.clip(np.concatenate([[l], z]), l, u)
    wr = np.clip(np.concatenate([z, [u]]), l, u)

    orders = set()
    if "g" in want:
        orders.add("reg1")
    if "value" in want:
        orders.add("reg0")
    if "hess" in want:
        orders.add("reg2")
    if "deps" in want:
        orders.add("reg1sqrt")

    x0, x1, cell = _cell_segments(d, wl, wr, y, psi, eps)
    vals = _segment_values(d, x0, x1, y[cell], psi[cell], eps, orders)
    out = {}
    if "g" in want:
        out["g"] = np.bincount(cell, vals["reg1"], n)
    if "value" in want:
        out["kint"] = float(np.bincount(cell, vals["reg0"], n).sum())
    if "deps" in want:
        out["deps"] = -np.bincount(cell, vals["reg1sqrt"], n) / eps
    if "hess" in want:
        hraw = np.bincount(cell, vals["reg2"], n)
        if n > 1:
            dy = np.diff(y)
            tz = psi[:-1] - (z - y[:-1]) ** 2
            kern = np.where(tz > 0.0, np.minimum(np.sqrt(np.maximum(tz, 0.0)) / eps, 1.0), 0.0)
            off = -kern * d.pdf(z) / (2.0 * dy)
        else:
            off = np.zeros(0)
        hdiag = hraw.copy()
        hdiag[: n - 1] -= off
        hdiag[1:] -= off
        out["hdiag"] = hdiag
        out["off"] = off
    return out


def reg_masses(d: Density1D, diracs: SortedDiracs, psi, params: RegParams) -> np.ndarray:
    """Smoothed cell masses G^eps(psi); entries lie in [0, mass(Lag_i)]."""
    return _assemble(d, diracs, psi, params.eps, {"g"})["g"]


def reg_dual_value(d: Density1D, diracs: SortedDiracs, psi, params: RegParams) -> float:
    """Smoothed dual functional; concave, C^2, and dominates the exact dual."""
    psi = np.asarray(psi, dtype=float)
    res = _assemble(d, diracs, psi, params.eps, {"value"})
    return float(np.dot(diracs.alpha, psi) - res["kint"])


def reg_hessian(d: Density1D, diracs: SortedDiracs, psi, params: RegParams) -> TridiagSym:
    """H^eps = -D^2 K^eps: positive semi-definite, weakly diagonally dominant.

    Off-diagonal entries are nonpositive; the diagonal dominance slack in
    row i is the boundary-layer integral of (f_eps*)'' over cell i.
    """
    res = _assemble(d, diracs, psi, params.eps, {"hess"})
    return TridiagSym(res["hdiag"], res["off"])


def eps_derivative(d: Density1D, diracs: SortedDiracs, psi, params: RegParams) -> np.ndarray:
    """d/d eps of the smoothed masses at fixed psi (entrywise <= 0).

    Reduced 1D form: -(1/eps^2) * integral of s(x) over the part of the
    cell where 0 < s(x) < eps, with s(x) = sqrt((psi_i - (x-y_i)^2)_+).
    """
    return _assemble(d, diracs, psi, params.eps, {"deps"})["deps"]
