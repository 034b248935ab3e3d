"""Symmetric tridiagonal matrices and the Thomas solve."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TridiagSym:
    """Symmetric tridiagonal matrix stored as diagonal + off-diagonal."""

    diag: np.ndarray
    off: np.ndarray = field(default=None)

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=float)
        if self.off is None:
            self.off = np.zeros(max(self.diag.size - 1, 0))
        self.off = np.ascontiguousarray(self.off, dtype=float)
        if self.diag.ndim != 1 or self.diag.size == 0:
            raise ValueError("diag must be a nonempty vector")
        if self.off.shape != (self.diag.size - 1,):
            raise ValueError("off must have length len(diag) - 1")

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        if self.n > 1:
            out[:-1] += self.off * v[1:]
            out[1:] += self.off * v[:-1]
        return out

    def dense(self):
        a = np.diag(self.diag)
        if self.n > 1:
            a += np.diag(self.off, 1) + np.diag(self.off, -1)
        return a


def tridiag_solve(t: TridiagSym, rhs) -> np.ndarray:
    """Solve t x = rhs by symmetric Gaussian elimination without pivoting.

    Stable for the diagonally dominant positive-definite systems produced
    by the smoothed transport Hessian.  Raises ValueError when a pivot is
    not strictly positive (singular or indefinite input).
    """
    b = np.array(rhs, dtype=float)
    if b.shape != (t.n,):
        raise ValueError("rhs length mismatch")
    d = t.diag.copy()
    if not d[0] > 0.0:
        raise ValueError("nonpositive pivot in tridiagonal solve")
    for i in range(t.n - 1):
        w = t.off[i] / d[i]
        d[i + 1] -= w * t.off[i]
        b[i + 1] -= w * b[i]
        if not d[i + 1] > 0.0:
            raise ValueError("nonpositive pivot in tridiagonal solve")
    x = b
    x[-1] /= d[-1]
    for i in range(t.n - 2, -1, -1):
        x[i] = (x[i] - t.off[i] * x[i + 1]) / d[i]
    return x
