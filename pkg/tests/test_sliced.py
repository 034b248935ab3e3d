"""Projections, rigid fitting, sliced descent steps, and file readers."""

import warnings

import numpy as np
import pytest

from usdot.density import uniform
from usdot.sliced import (
    PointCloud,
    RegisterConfig,
    RigidTransform,
    TargetShape,
    _group_projections,
    fist_step,
    fit_rigid,
    project,
    read_off,
    read_points,
    register,
)

SQUARE = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])


def square_outline(thickness=0.02):
    segs = np.stack([SQUARE, np.roll(SQUARE, -1, axis=0)], axis=1)
    return TargetShape.from_segments(segs, thickness=thickness)


def rot2(deg):
    a = np.deg2rad(deg)
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def test_cloud_and_shape_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros(3))
    with pytest.raises(ValueError):
        PointCloud(np.array([[np.inf, 0.0]]))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((2, 2)), mass=0.0)
    c = PointCloud(np.zeros((4, 3)))
    assert c.n == 4 and c.dim == 3

    with pytest.raises(ValueError, match="kind"):
        TargetShape("blobs", np.zeros((1, 2)))
    with pytest.raises(ValueError):
        TargetShape.from_segments(np.zeros((1, 3, 2)))
    with pytest.raises(ValueError):
        TargetShape.from_triangles(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        TargetShape.from_points(np.zeros((2, 2)), thickness=0.0)
    with pytest.raises(ValueError, match="no length"):
        TargetShape.from_segments(np.zeros((2, 2, 2))).element_masses()


def test_element_masses_proportional():
    segs = np.array([[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 3.0]]])
    m = TargetShape.from_segments(segs, mass=2.0).element_masses()
    assert m == pytest.approx([0.5, 1.5], abs=1e-14)
    tris = np.array(
        [[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
         [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]]
    )
    m = TargetShape.from_triangles(tris).element_masses()
    assert m == pytest.approx([0.2, 0.8], abs=1e-14)


def test_rigid_transform_algebra():
    r = rot2(30.0)
    t = np.array([0.3, -0.7])
    tr = RigidTransform(r, t)
    x = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert tr.apply(x) == pytest.approx(x @ r.T + t)
    ident = RigidTransform.identity(2)
    assert ident.apply(x) == pytest.approx(x)
    tr2 = RigidTransform(rot2(-45.0), np.array([1.0, 0.0]))
    comp = tr.compose(tr2)
    assert comp.apply(x) == pytest.approx(tr.apply(tr2.apply(x)), abs=1e-12)
    with pytest.raises(ValueError):
        RigidTransform(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2))  # reflection
    with pytest.raises(ValueError):
        RigidTransform(2.0 * np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3), np.zeros(2))


def test_project_cloud_sorted():
    c = PointCloud(np.array([[1.0, 0.0], [-1.0, 0.5], [0.0, 2.0]]))
    p = project(c, np.array([2.0, 0.0]))  # direction gets normalized
    assert p == pytest.approx([-1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        project(c, np.zeros(2))
    with pytest.raises(ValueError):
        project(c, np.array([1.0, 0.0, 0.0]))


def test_project_segment_uniform():
    seg = TargetShape.from_segments(np.array([[[0.0, 0.0], [1.0, 1.0]]]), mass=2.0)
    d = project(seg, np.array([1.0, 0.0]))
    assert d.support == pytest.approx((0.0, 1.0))
    assert d.total_mass == pytest.approx(2.0, abs=1e-12)
    assert d.pdf(0.5) == pytest.approx(2.0, abs=1e-12)


def test_project_square_outline_conserves_mass():
    shape = square_outline(thickness=0.02)
    for theta in (np.array([1.0, 0.0]), np.array([1.0, 1.0]), np.array([0.3, -0.9])):
        d = project(shape, theta)
        assert d.total_mass == pytest.approx(1.0, abs=1e-12)
    # axis-aligned direction collapses two edges; without thickness it fails
    bare = TargetShape.from_segments(np.stack([SQUARE, np.roll(SQUARE, -1, axis=0)], axis=1))
    with pytest.raises(ValueError, match="collapses"):
        project(bare, np.array([1.0, 0.0]))


def test_project_triangle_ramp():
    tri = TargetShape.from_triangles(
        np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]), mass=1.0
    )
    d = project(tri, np.array([1.0, 0.0]))
    # width of the triangle at x is (1 - x): a pure descending ramp
    assert d.pdf(0.0, side=1) == pytest.approx(2.0, abs=1e-12)
    assert d.pdf(0.5) == pytest.approx(1.0, abs=1e-12)
    assert d.total_mass == pytest.approx(1.0, abs=1e-12)


def test_project_points_histogram_and_degenerate():
    pts = TargetShape.from_points(np.array([[0.0, 0.0], [1.0, 0.0]]), bins=4)
    d = project(pts, np.array([1.0, 0.0]))
    assert d.total_mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError, match="degenerate"):
        project(pts, np.array([0.0, 1.0]))
    thick = TargetShape.from_points(np.array([[0.0, 0.0], [1.0, 0.0]]), thickness=0.5)
    d = project(thick, np.array([0.0, 1.0]))
    assert d.support == pytest.approx((-0.25, 0.25))
    assert d.total_mass == pytest.approx(1.0, abs=1e-12)


def test_group_projections_pools_near_ties():
    vals = np.array([1.0, 0.0, 1.0 + 1e-12, 5.0])
    y, counts, gid = _group_projections(vals)
    assert list(counts) == [1, 2, 1]
    assert y[1] == pytest.approx(1.0, abs=1e-9)
    assert gid[0] == gid[2] == 1
    assert gid[1] == 0 and gid[3] == 2
    vals = np.array([3.0, -1.0])
    y, counts, gid = _group_projections(vals)
    assert list(y) == [-1.0, 3.0]
    assert list(gid) == [1, 0]


def test_fist_step_zero_on_registered_cloud():
    """Points at projected window centers receive machine-zero displacement."""
    target = TargetShape.from_segments(
        np.array([[[-1.0, 0.0], [1.0, 0.0]]]), thickness=0.05
    )
    pts = np.stack([np.linspace(-0.8, 0.8, 5), np.zeros(5)], axis=1)
    ang = np.random.default_rng(0).uniform(0, np.pi, 16)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = fist_step(PointCloud(pts), target, dirs)
    assert res.used == 16
    assert np.abs(res.displacements).max() < 1e-14
    assert all(r.converged for r in res.reports)


def test_fist_step_validation():
    target = square_outline()
    cloud = PointCloud(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        fist_step(cloud, target, np.eye(2), mass_ratio=1.0)
    with pytest.raises(ValueError):
        fist_step(cloud, target, np.eye(2), eps_rel=0.0)
    with pytest.raises(ValueError):
        fist_step(PointCloud(np.zeros((3, 3))), target, np.eye(3))
    # all directions failing is an error, not a silent zero step
    bare_pt = TargetShape.from_points(np.array([[0.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="every direction failed"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fist_step(cloud, bare_pt, np.array([[1.0, 0.0]]))


def test_fist_step_pulls_toward_target():
    target = TargetShape.from_segments(
        np.array([[[-1.0, 0.0], [1.0, 0.0]]]), thickness=0.05
    )
    pts = np.stack([np.linspace(-0.8, 0.8, 9), np.full(9, 0.6)], axis=1)
    ang = np.linspace(0.1, np.pi - 0.1, 12)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    res = fist_step(PointCloud(pts), target, dirs, mass_ratio=0.9)
    # mean vertical displacement points down toward the segment
    assert res.displacements[:, 1].mean() < -0.1


def test_fit_rigid_recovers_exact_motion():
    rng = np.random.default_rng(50)
    for dim in (2, 3):
        a = rng.standard_normal((12, dim))
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        t = rng.standard_normal(dim)
        b = a @ q.T + t
        tr = fit_rigid(a, b)
        assert np.abs(tr.rotation - q).max() < 1e-10
        assert np.abs(tr.translation - t).max() < 1e-10
        assert np.abs(tr.apply(a) - b).max() < 1e-10
    with pytest.raises(ValueError):
        fit_rigid(np.zeros((3, 2)), np.zeros((4, 2)))


def test_fit_rigid_never_reflects():
    a = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    b = a.copy()
    b[:, 0] = -b[:, 0]  # mirror image
    tr = fit_rigid(a, b)
    assert np.linalg.det(tr.rotation) == pytest.approx(1.0, abs=1e-12)


def test_register_composition_and_early_stop():
    target = square_outline()
    rng = np.random.default_rng(51)
    t = rng.uniform(0, 4, 40)
    side = np.floor(t).astype(int)
    frac = t - side
    pts = SQUARE[side] + frac[:, None] * (np.roll(SQUARE, -1, axis=0) - SQUARE)[side]
    moved = pts @ rot2(8.0).T + np.array([0.15, -0.1])
    cfg = RegisterConfig(iterations=4, n_directions=8, seed=2, mass_ratio=0.9)
    res = register(PointCloud(moved), target, cfg)
    assert len(res.transforms) == 4 and len(res.rms_history) == 4
    assert np.abs(res.points - res.transform.apply(moved)).max() < 1e-12
    assert np.abs(res.points - res.transforms[-1].apply(moved)).max() < 1e-12
    # huge stop_tol ends after the first sweep
    cfg = RegisterConfig(iterations=4, n_directions=8, seed=2, stop_tol=10.0)
    res = register(PointCloud(moved), target, cfg)
    assert len(res.rms_history) == 1
    with pytest.raises(ValueError):
        RegisterConfig(iterations=0)


def test_read_points(tmp_path):
    f = tmp_path / "pts.txt"
    f.write_text("# header\n1.0, 2.0\n\n3 4 # trailing\n")
    pts = read_points(f)
    assert pts == pytest.approx(np.array([[1.0, 2.0], [3.0, 4.0]]))
    f.write_text("1 2\n3\n")
    with pytest.raises(ValueError, match="inconsistent"):
        read_points(f)
    f.write_text("# nothing\n")
    with pytest.raises(ValueError, match="no points"):
        read_points(f)


def test_read_off(tmp_path):
    f = tmp_path / "shape.off"
    f.write_text(
        "OFF\n# tetrahedron plus a quad face\n5 3 0\n"
        "0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 0\n"
        "3 0 1 2\n3 0 1 3\n4 0 1 4 2\n"
    )
    shape = read_off(f)
    assert shape.kind == "triangles"
    assert shape.dim == 3
    # the quad fans into two triangles
    assert shape.data.shape == (4, 3, 3)
    f.write_text("OFF\n3 0 0\n0 0 0\n1 0 0\n0 1 0\n")
    with pytest.raises(ValueError, match="no faces"):
        read_off(f)
    f.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_off(f)
