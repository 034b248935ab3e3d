"""Sliced partial transport registration of a point cloud onto a shape.

Each random direction reduces the d-dimensional problem to the line: the
target shape projects to a piecewise density, the cloud projects to
Diracs carrying a fixed fraction of the target mass, and the
semi-discrete solver produces one barycenter displacement per point.
Averaging the per-direction displacements (scaled by the dimension) gives
a descent step for the sliced transport energy; projecting the moved
cloud back onto the rigid motions (orthogonal Procrustes) turns the flow
into a registration loop.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cells import SortedDiracs, barycenters, layout
from .density import Density1D, from_histogram, uniform
from .solver import SolverConfig, solve_regularized


@dataclass(frozen=True)
class PointCloud:
    """Finite point set with uniformly spread total mass."""

    points: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a nonempty (n, dim) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not self.mass > 0.0:
            raise ValueError("mass must be positive")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class TargetShape:
    """Uniform measure on points, segments, or triangles in R^dim.

    Mass spreads over elements proportionally to their length or area
    (uniformly over a point set).  Projections of point sets are binned
    into `bins` buckets; `thickness` widens direction-degenerate
    projections into uniform blocks instead of failing.
    """

    kind: str
    data: np.ndarray
    mass: float = 1.0
    bins: int = 64
    thickness: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        expect = {"points": 2, "segments": 3, "triangles": 3}
        if self.kind not in expect:
            raise ValueError("kind must be points, segments, or triangles")
        if data.ndim != expect[self.kind] or data.shape[0] < 1:
            raise ValueError(f"bad element array shape for kind {self.kind!r}")
        if self.kind == "segments" and data.shape[1] != 2:
            raise ValueError("segments need two vertices each")
        if self.kind == "triangles" and data.shape[1] != 3:
            raise ValueError("triangles need three vertices each")
        if not np.all(np.isfinite(data)):
            raise ValueError("vertices must be finite")
        if not self.mass > 0.0 or self.bins < 1:
            raise ValueError("mass must be positive and bins at least 1")
        if self.thickness is not None and not self.thickness > 0.0:
            raise ValueError("thickness must be positive when given")
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[-1]

    @classmethod
    def from_points(cls, pts, mass=1.0, bins=64, thickness=None):
        return cls("points", np.asarray(pts, dtype=float), mass, bins, thickness)

    @classmethod
    def from_segments(cls, segs, mass=1.0, thickness=None):
        return cls("segments", np.asarray(segs, dtype=float), mass, 64, thickness)

    @classmethod
    def from_triangles(cls, tris, mass=1.0, thickness=None):
        return cls("triangles", np.asarray(tris, dtype=float), mass, 64, thickness)

    def element_masses(self) -> np.ndarray:
        if self.kind == "points":
            w = np.ones(self.data.shape[0])
        elif self.kind == "segments":
            w = np.linalg.norm(self.data[:, 1] - self.data[:, 0], axis=1)
        else:
            u = self.data[:, 1] - self.data[:, 0]
            v = self.data[:, 2] - self.data[:, 0]
            if self.dim == 2:
                w = 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
            else:
                w = 0.5 * np.linalg.norm(np.cross(u, v), axis=1)
        total = float(w.sum())
        if not total > 0.0:
            raise ValueError("shape has no length or area to carry mass")
        return self.mass * w / total


@dataclass(frozen=True)
class RigidTransform:
    """x -> rotation @ x + translation with det(rotation) = +1."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        d = t.shape[0] if t.ndim == 1 else -1
        if r.shape != (d, d):
            raise ValueError("rotation and translation dimensions disagree")
        if not np.allclose(r.T @ r, np.eye(d), atol=1e-8) or np.linalg.det(r) < 0.0:
            raise ValueError("rotation must be special orthogonal")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, dim: int) -> "RigidTransform":
        return cls(np.eye(dim), np.zeros(dim))

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self.compose(other)).apply(x) = self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


def _merge_spans(spans, mass: float) -> Density1D:
    """Sum of affine bumps (x0, x1, v0, v1) -> piecewise affine density."""
    pts = np.unique(np.concatenate([[s[0], s[1]] for s in spans]))
    p = pts.size - 1
    va = np.zeros(p)
    vb = np.zeros(p)
    for x0, x1, v0, v1 in spans:
        i0 = np.searchsorted(pts, x0)
        i1 = np.searchsorted(pts, x1)
        if i1 <= i0:
            continue
        slope = (v1 - v0) / (x1 - x0)
        idx = np.arange(i0, i1)
        va[idx] += v0 + slope * (pts[idx] - x0)
        vb[idx] += v0 + slope * (pts[idx + 1] - x0)
    kinds = np.ones(p, dtype=np.int8)
    return Density1D(pts, kinds, np.maximum(va, 0.0), np.maximum(vb, 0.0), np.zeros(p), mass=mass)


def project(obj, theta):
    """Project onto a unit direction.

    Point clouds return their sorted scalar projections; target shapes
    return the projected mass as a Density1D.  Elements whose projection
    collapses (direction orthogonal to the element) become uniform blocks
    of width `thickness`, or raise ValueError if no thickness is set.
    """
    theta = np.asarray(theta, dtype=float)
    nrm = float(np.linalg.norm(theta))
    if not nrm > 0.0:
        raise ValueError("direction must be nonzero")
    theta = theta / nrm

    if isinstance(obj, PointCloud):
        if theta.shape != (obj.dim,):
            raise ValueError("direction dimension mismatch")
        return np.sort(obj.points @ theta)

    shape: TargetShape = obj
    if theta.shape != (shape.dim,):
        raise ValueError("direction dimension mismatch")
    masses_e = shape.element_masses()
    proj = shape.data @ theta

    if shape.kind == "points":
        lo, hi = float(proj.min()), float(proj.max())
        scale = max(1.0, abs(lo), abs(hi))
        if hi - lo <= 1e-12 * scale:
            if shape.thickness is None:
                raise ValueError(
                    "degenerate projection of a point target; set thickness"
                )
            h = shape.thickness
            c = 0.5 * (lo + hi)
            return uniform(c - 0.5 * h, c + 0.5 * h, mass=shape.mass)
        counts, edges = np.histogram(
            proj, bins=shape.bins, range=(lo, hi), weights=masses_e
        )
        return from_histogram(edges, counts, mass=shape.mass)

    verts = np.sort(proj, axis=1)
    widths = verts[:, -1] - verts[:, 0]
    scale = max(1.0, float(np.abs(verts).max()))
    degenerate = widths <= 1e-12 * scale
    if np.any(degenerate) and shape.thickness is None:
        raise ValueError(
            f"direction collapses {int(degenerate.sum())} element(s); set thickness"
        )
    spans = []
    for e in range(verts.shape[0]):
        me = masses_e[e]
        if degenerate[e]:
            h = shape.thickness
            c = 0.5 * (verts[e, 0] + verts[e, -1])
            spans.append((c - 0.5 * h, c + 0.5 * h, me / h, me / h))
            continue
        if shape.kind == "segments":
            v = me / widths[e]
            spans.append((verts[e, 0], verts[e, 1], v, v))
        else:
            p1, p2, p3 = verts[e]
            peak = 2.0 * me / (p3 - p1)
            if p2 > p1:
                spans.append((p1, p2, 0.0, peak))
            if p3 > p2:
                spans.append((p2, p3, peak, 0.0))
    return _merge_spans(spans, shape.mass)


@dataclass
class DirectionReport:
    """Per-direction outcome inside one descent step."""

    theta: np.ndarray
    converged: bool
    iterations: int
    residual: float
    delta: np.ndarray | None


@dataclass
class FistResult:
    displacements: np.ndarray
    used: int
    reports: list


def _group_projections(values: np.ndarray):
    """Sort and merge near-coincident projections; returns (y, counts, point_gid).

    Walls between Diracs closer than ~1e-7 of the span cannot be resolved
    in double precision (the wall moves by ulp(psi)/(2 dy)), so such
    points are pooled into one Dirac carrying their combined mass.
    """
    n = values.size
    order = np.argsort(values, kind="stable")
    s = values[order]
    tol = 1e-7 * max(1.0, float(s[-1] - s[0]))
    fresh = np.ones(n, dtype=bool)
    fresh[1:] = np.diff(s) > tol
    gid_sorted = np.cumsum(fresh) - 1
    counts = np.bincount(gid_sorted)
    y = np.bincount(gid_sorted, weights=s) / counts
    gid = np.empty(n, dtype=np.int64)
    gid[order] = gid_sorted
    return y, counts, gid


def fist_step(
    cloud: PointCloud,
    target: TargetShape,
    directions,
    mass_ratio: float = 0.5,
    eps_rel: float = 0.05,
    solver: SolverConfig | None = None,
) -> FistResult:
    """One sliced descent step: average barycenter displacement over directions.

    Each point receives (dim / K) * sum_k delta_k(point) * theta_k where
    delta_k is the barycenter offset of the point's Dirac in the projected
    semi-discrete problem.  The smoothing width of each 1D solve is
    eps_rel times the projected support width, which makes the step
    equivariant under direction-dependent shrinking of the projection
    (an absolute width would bias foreshortened directions).  Directions
    whose solve fails are skipped with a warning; K counts the successful
    ones.
    """
    if not 0.0 < mass_ratio < 1.0:
        raise ValueError("mass_ratio must lie strictly between 0 and 1")
    if not eps_rel > 0.0:
        raise ValueError("eps_rel must be positive")
    if cloud.dim != target.dim:
        raise ValueError("cloud and target dimensions disagree")
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[1] != cloud.dim:
        raise ValueError("direction dimension mismatch")
    if solver is None:
        solver = SolverConfig(tol=1e-5, collect_diagnostics=False)

    n, dim = cloud.n, cloud.dim
    disp = np.zeros((n, dim))
    reports = []
    used = 0
    for theta in directions:
        theta = theta / np.linalg.norm(theta)
        try:
            dens = project(target, theta)
            y, counts, gid = _group_projections(cloud.points @ theta)
            alpha = mass_ratio * dens.total_mass * counts / n
            diracs = SortedDiracs(y, alpha, source_mass=dens.total_mass)
            lo, hi = dens.support
            cfg = dataclasses.replace(solver, eps=eps_rel * (hi - lo))
            rep = solve_regularized(dens, diracs, cfg)
        except ValueError as err:
            warnings.warn(f"direction {theta} skipped: {err}", stacklevel=2)
            reports.append(DirectionReport(theta, False, 0, np.nan, None))
            continue
        if not rep.converged:
            warnings.warn(
                f"direction {theta} skipped: solver status {rep.status}", stacklevel=2
            )
            reports.append(
                DirectionReport(
                    theta, False, rep.iterations, rep.residual_history[-1], None
                )
            )
            continue
        lay = layout(dens, diracs, rep.psi)
        delta = (barycenters(dens, lay) - y)[gid]
        disp += delta[:, None] * theta[None, :]
        used += 1
        reports.append(
            DirectionReport(theta, True, rep.iterations, rep.residual_history[-1], delta)
        )
    if used == 0:
        raise ValueError("every direction failed; no displacement available")
    disp *= dim / used
    return FistResult(disp, used, reports)


def fit_rigid(a: np.ndarray, b: np.ndarray) -> RigidTransform:
    """Special-orthogonal Procrustes: least-squares rigid map sending a to b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("point arrays must have matching (n, dim) shapes")
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.ones(a.shape[1])
    d[-1] = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ (d[:, None] * u.T)
    return RigidTransform(r, cb - r @ ca)


def _random_directions(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((k, dim))
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    while np.any(nrm == 0.0):
        v = rng.standard_normal((k, dim))
        nrm = np.linalg.norm(v, axis=1, keepdims=True)
    return v / nrm


@dataclass(frozen=True)
class RegisterConfig:
    """Registration loop settings.

    eps_rel sets the per-direction smoothing width relative to the
    projected support; stop_tol ends the loop early once the
    root-mean-square displacement proposal drops below it (0 disables
    early stopping).
    """

    iterations: int = 50
    n_directions: int = 32
    mass_ratio: float = 0.5
    eps_rel: float = 0.05
    seed: int = 0
    stop_tol: float = 0.0
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(tol=1e-5, collect_diagnostics=False)
    )

    def __post_init__(self):
        if self.iterations < 1 or self.n_directions < 1:
            raise ValueError("need at least one iteration and one direction")


@dataclass
class RegisterResult:
    """transform maps the original cloud to its final registered position;
    transforms[i] is the cumulative rigid motion after iteration i."""

    points: np.ndarray
    transform: RigidTransform
    transforms: list
    rms_history: list


def register(cloud: PointCloud, target: TargetShape, config: RegisterConfig | None = None) -> RegisterResult:
    """Iterated sliced descent projected onto rigid motions."""
    config = config or RegisterConfig()
    rng = np.random.default_rng(config.seed)
    pts = cloud.points.copy()
    total = RigidTransform.identity(cloud.dim)
    transforms = []
    rms_history = []
    for _ in range(config.iterations):
        dirs = _random_directions(rng, config.n_directions, cloud.dim)
        step = fist_step(
            PointCloud(pts, cloud.mass),
            target,
            dirs,
            config.mass_ratio,
            config.eps_rel,
            config.solver,
        )
        rms = float(np.sqrt(np.mean(np.sum(step.displacements**2, axis=1))))
        rms_history.append(rms)
        move = fit_rigid(pts, pts + step.displacements)
        pts = move.apply(pts)
        total = move.compose(total)
        transforms.append(total)
        if config.stop_tol > 0.0 and rms < config.stop_tol:
            break
    return RegisterResult(pts, total, transforms, rms_history)


def read_points(path) -> np.ndarray:
    """Whitespace- or comma-separated coordinates, one point per line."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip().replace(",", " ")
            if line:
                rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ValueError("no points found")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise ValueError("inconsistent point dimensions")
    return np.asarray(rows, dtype=float)


def read_off(path) -> TargetShape:
    """Triangle soup from an OFF file (polygon faces are fan-triangulated)."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens:
        raise ValueError("empty OFF file")
    pos = 0
    if tokens[0].upper() == "OFF":
        pos = 1
    nv, nf = int(tokens[pos]), int(tokens[pos + 1])
    pos += 3
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    tris = []
    for _ in range(nf):
        k = int(tokens[pos])
        face = [int(t) for t in tokens[pos + 1 : pos + 1 + k]]
        pos += 1 + k
        for j in range(1, k - 1):
            tris.append((face[0], face[j], face[j + 1]))
    if not tris:
        raise ValueError("OFF file has no faces")
    return TargetShape.from_triangles(verts[np.array(tris)])
