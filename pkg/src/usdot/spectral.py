"""Spectral lower-bound machinery for the tridiagonal dual Hessians.

A weakly diagonally dominant symmetric tridiagonal matrix with nonpositive
off-diagonal extends to a graph Laplacian on one extra hub vertex: the hub
edge weights are the dominance slacks, making every row sum zero.  The
smallest eigenvalue of the original matrix is then controlled by the
spectral gap of the extension, which connectivity of the weighted graph
bounds from below.  Eigenvalues are located by inertia bisection; counting
negative pivots of a shifted LDL factorization costs O(N) per probe both
for plain tridiagonal matrices and for the bordered extension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tridiag import TridiagSym


@dataclass(frozen=True)
class LaplacianExt:
    """Graph Laplacian on vertices {hub, 1..N} extending a tridiagonal matrix.

    base holds the inner block; col0[i] is the weight of the edge from
    inner vertex i to the hub, so the dense matrix is

        [[sum(col0), -col0^T       ],
         [-col0,      base (tridiag)]].
    """

    base: TridiagSym
    col0: np.ndarray

    def __post_init__(self):
        if self.col0.shape != (self.base.n,):
            raise ValueError("hub column size must match the inner block")

    @property
    def n(self) -> int:
        return self.base.n + 1

    def dense(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        m[1:, 1:] = self.base.dense()
        m[0, 0] = self.col0.sum()
        m[0, 1:] = -self.col0
        m[1:, 0] = -self.col0
        return m


def laplacian_extension(t: TridiagSym) -> LaplacianExt:
    """Extend a weakly diagonally dominant tridiagonal matrix to a Laplacian.

    Requires nonpositive off-diagonal entries and row slacks
    diag_i - |off_{i-1}| - |off_i| >= 0; tiny violations (within 1e-12 of
    the matrix scale) are clamped to zero, larger ones raise ValueError.
    """
    diag, off = t.diag, t.off
    scale = max(1.0, float(np.abs(diag).max(initial=0.0)))
    tol = 1e-12 * scale
    if off.size and float(off.max(initial=-np.inf)) > tol:
        raise ValueError("off-diagonal entries must be nonpositive")
    slack = diag.copy()
    slack[:-1] -= np.abs(off)
    slack[1:] -= np.abs(off)
    if float(slack.min()) < -tol:
        raise ValueError("matrix is not weakly diagonally dominant")
    return LaplacianExt(TridiagSym(diag, np.minimum(off, 0.0)), np.maximum(slack, 0.0))


def _count_tridiag(diag, off, sigma):
    """Negative pivots of LDL^T of T - sigma*I (= #eigenvalues < sigma)."""
    count = 0
    prev = 0.0
    for i in range(diag.size):
        d = diag[i] - sigma
        if i > 0:
            d -= off[i - 1] * off[i - 1] / prev
        if d == 0.0:
            d = -1e-300
        if d < 0.0:
            count += 1
        prev = d
    return count


def _count_ext(ext: LaplacianExt, sigma):
    """Eigenvalues of the extension below sigma, via bordered elimination.

    Pivots run through the inner tridiagonal block first; the only fill-in
    lives in the hub row, so one O(N) sweep updates the hub Schur
    complement alongside the usual tridiagonal recurrence.
    """
    diag, off, col0 = ext.base.diag, ext.base.off, ext.col0
    count = 0
    hub = float(col0.sum()) - sigma
    prev_d = 0.0
    prev_e = 0.0
    for i in range(diag.size):
        d = diag[i] - sigma
        e = -col0[i]
        if i > 0:
            d -= off[i - 1] * off[i - 1] / prev_d
            e -= off[i - 1] * prev_e / prev_d
        if d == 0.0:
            d = -1e-300
        if d < 0.0:
            count += 1
        hub -= e * e / d
        prev_d, prev_e = d, e
    if hub < 0.0:
        count += 1
    return count


def min_eig_sym(t, restrict_to_orthogonal_of_ones: bool = False) -> float:
    """k-th smallest eigenvalue by inertia bisection (k=1, or k=2 if restricted).

    Accepts a TridiagSym or a LaplacianExt.  With
    restrict_to_orthogonal_of_ones=True the matrix is assumed to be a
    singular Laplacian whose kernel is spanned by the ones vector, so the
    minimum over that orthogonal complement is the second-smallest
    eigenvalue.  Bisection runs to an absolute width of 1e-10 times the
    matrix scale.
    """
    if isinstance(t, LaplacianExt):
        diag = np.concatenate([[float(t.col0.sum())], t.base.diag])
        radius = np.zeros(t.n)
        radius[0] = float(np.abs(t.col0).sum())
        radius[1:] = np.abs(t.col0)
        radius[1:-1] += np.abs(t.base.off)
        radius[2:] += np.abs(t.base.off)
        count = lambda s: _count_ext(t, s)
    else:
        diag = t.diag
        radius = np.zeros(t.n)
        if t.off.size:
            radius[:-1] += np.abs(t.off)
            radius[1:] += np.abs(t.off)
        count = lambda s: _count_tridiag(t.diag, t.off, s)
    k = 2 if restrict_to_orthogonal_of_ones else 1
    if k > diag.size:
        raise ValueError("matrix too small for the restricted eigenvalue")
    lo = float((diag - radius).min())
    hi = float((diag + radius).max())
    scale = max(1.0, abs(lo), abs(hi))
    width = 1e-10 * scale
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if count(mid) >= k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def fiedler_bound(n: int, beta: float) -> float:
    """Lower bound on the inner-block minimum eigenvalue from connectivity.

    If every edge cut of the extension graph has weight at least beta, the
    spectral gap is at least 4*beta*sin^2(pi/(2n+2)), and dividing by the
    extension size bounds the original matrix from below.
    """
    return (4.0 * beta / (n + 1)) * float(np.sin(np.pi / (2 * n + 2)) ** 2)


def connectivity_check(ext: LaplacianExt, beta: float) -> dict:
    """Check beta-uniform connectivity of the extension graph.

    Keeps only edges of weight >= beta, then reports whether the thresholded
    graph is connected (union-find over hub + inner vertices), whether each
    consecutive inner pair is linked either directly or through the hub, and
    the resulting eigenvalue lower bound (valid when the checks pass).
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    n = ext.base.n
    w_chain = np.abs(ext.base.off)
    w_hub = ext.col0

    parent = np.arange(n + 1)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    edges = []
    for i in range(n - 1):
        if w_chain[i] >= beta:
            union(i + 1, i + 2)
            edges.append((i + 1, i + 2, float(w_chain[i])))
    for i in range(n):
        if w_hub[i] >= beta:
            union(0, i + 1)
            edges.append((0, i + 1, float(w_hub[i])))
    roots = {find(i) for i in range(n + 1)}

    hub_ok = w_hub >= beta
    pairs_ok = (w_chain >= beta) | (hub_ok[:-1] & hub_ok[1:])
    return {
        "beta": float(beta),
        "edges": edges,
        "n_components": len(roots),
        "connected": len(roots) == 1,
        "pairs_ok": pairs_ok,
        "uniformly_connected": bool(pairs_ok.all()) and bool(hub_ok.any()),
        "fiedler_bound": fiedler_bound(n, beta),
    }
