import math

import numpy as np
import pytest

from schwarzdisks.errors import MissingSkeletonData, TooCloseToBoundary
from schwarzdisks.geometry2d import ArcPiece, Disk, build_geometry
from schwarzdisks.harmonic2d import (
    BoundaryTrace,
    QuadratureConfig,
    SkeletonSample,
    assemble_interior_trace,
    endpoint_functional,
    eval_at_skeleton_sample,
    lagrange4,
    poisson_eval,
)
from schwarzdisks.pou import continuous_pou
from schwarzdisks.schwarz import SkeletonField, SkeletonLayout

from _support import flower, three_disks

UNIT = Disk(1, (0.0, 0.0), 1.0)


def disk_points(disk, rmax, n=300, seed=0):
    rng = np.random.default_rng(seed)
    rad = np.sqrt(rng.uniform(0, rmax ** 2, n)) * disk.radius
    ang = rng.uniform(0, 2 * np.pi, n)
    return np.c_[disk.center[0] + rad * np.cos(ang), disk.center[1] + rad * np.sin(ang)]


def test_constant_data():
    tr = BoundaryTrace.from_function(UNIT, lambda p: np.ones(len(p)))
    v = poisson_eval(UNIT, tr, disk_points(UNIT, 0.999))
    assert np.abs(v - 1).max() <= 1e-12


def test_cos_theta():
    tr = BoundaryTrace.from_function(UNIT, lambda p: p[:, 0])
    pts = disk_points(UNIT, 0.9)
    assert np.abs(poisson_eval(UNIT, tr, pts) - pts[:, 0]).max() <= 1e-10


def test_cos_eight_theta():
    tr = BoundaryTrace.from_function(UNIT, lambda p: np.cos(8 * np.arctan2(p[:, 1], p[:, 0])))
    pts = disk_points(UNIT, 0.9)
    r = np.hypot(pts[:, 0], pts[:, 1])
    exact = r ** 8 * np.cos(8 * np.arctan2(pts[:, 1], pts[:, 0]))
    assert np.abs(poisson_eval(UNIT, tr, pts) - exact).max() <= 1e-8


def test_single_point_returns_float():
    tr = BoundaryTrace.from_function(UNIT, lambda p: p[:, 1])
    assert poisson_eval(UNIT, tr, np.array([0.1, 0.3])) == pytest.approx(0.3, abs=1e-13)


def test_too_close_to_boundary():
    tr = BoundaryTrace.from_function(UNIT, lambda p: p[:, 0])
    with pytest.raises(TooCloseToBoundary):
        poisson_eval(UNIT, tr, np.array([1.0 - 1e-6, 0.0]))


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(nodes_per_piece=3)
    with pytest.raises(ValueError):
        QuadratureConfig(min_distance=0.0)


def random_piecewise_trace(disk, pieces, rng, lo=0.0, hi=1.0):
    funcs = []
    for _ in pieces:
        a, b, c = rng.uniform(-1, 1, 3)
        u, v = np.sort(rng.uniform(lo, hi, 2))

        def f(t, a=a, b=b, c=c, u=u, v=v):
            s = 0.5 + 0.5 * np.sin(a * np.cos(t) + b * np.sin(2 * t) + c)
            return u + (v - u) * s

        funcs.append(f)
    return BoundaryTrace(disk.id, tuple(pieces), tuple(funcs))


def near_boundary_points(disk, n, rng):
    gap = 10 ** rng.uniform(-3.9, -0.1, n)
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = disk.radius * (1 - gap)
    return np.c_[disk.center[0] + rad * np.cos(ang), disk.center[1] + rad * np.sin(ang)]


def test_maximum_principle_linearity_monotonicity():
    g = flower()
    disk = g.disk(1)
    pieces = g.pieces(1)
    rng = np.random.default_rng(2)
    pts = near_boundary_points(disk, 400, rng)
    tau = 1e-8
    for _ in range(10):
        t1 = random_piecewise_trace(disk, pieces, rng, -0.3, 0.8)
        t2 = random_piecewise_trace(disk, pieces, rng, -0.3, 0.8)
        v1 = poisson_eval(disk, t1, pts)
        v2 = poisson_eval(disk, t2, pts)
        assert v1.min() >= -0.3 - tau and v1.max() <= 0.8 + tau
        combo = BoundaryTrace(1, pieces, tuple(
            (lambda t, f=f, h=h: 2.0 * f(t) - 0.5 * h(t)) for f, h in zip(t1.funcs, t2.funcs)))
        assert np.abs(poisson_eval(disk, combo, pts) - (2 * v1 - 0.5 * v2)).max() <= 1e-10
        upper = BoundaryTrace(1, pieces, tuple(
            (lambda t, f=f, h=h: np.maximum(f(t), h(t))) for f, h in zip(t1.funcs, t2.funcs)))
        assert np.all(v1 <= poisson_eval(disk, upper, pts) + tau)


def test_endpoint_rule_matches_interior_values():
    # lens: data 1 on the arc of circle 1 inside disk 2, 0 outside. Circle 2
    # passes through both jump points, so the harmonic measure is constant on
    # it and the endpoint value must equal the interior values.
    g = build_geometry([Disk(1, (0, 0), 1.0), Disk(2, (1.5, 0), 1.0)])
    disk = g.disk(1)
    pieces = g.pieces(1)
    tr = BoundaryTrace(1, pieces, tuple(
        (lambda t: np.zeros(np.shape(t))) if p.exterior else (lambda t: np.ones(np.shape(t)))
        for p in pieces))
    arc = g.skeletons()[0].arc(2)
    ends = [eval_at_skeleton_sample(disk, tr, SkeletonSample.from_arc(g, arc, i))
            for i in (0, arc.n_samples - 1)]
    t = arc.lo + np.array([1e-4, 1e-2, 0.3, 0.5 * (arc.hi - arc.lo)])
    pts = np.array([g.disk(2).point_at(x) for x in t])
    inner = poisson_eval(disk, tr, pts, QuadratureConfig(min_distance=1e-7))
    assert np.abs(inner - ends[0]).max() < 1e-10
    assert ends[0] == pytest.approx(ends[1], abs=1e-12)
    assert 0.0 < ends[0] < 1.0


def test_endpoint_functional_continuous_data():
    pieces = (ArcPiece(1, 0.0, 2 * math.pi, ()),)
    (t1, p1, w1), (t2, p2, w2) = endpoint_functional(UNIT, pieces, (0.0, 1.0), (0.0, -1.0))
    assert w1 + w2 == 1.0


def test_lagrange_exact_on_cubics():
    theta = np.linspace(0.1, 1.9, 50)
    idx, w = lagrange4(17, 0.1, 1.9, theta)
    grid = np.linspace(0.1, 1.9, 17)
    f = lambda t: 2 * t ** 3 - t + 0.5
    assert np.abs((w * f(grid)[idx]).sum(axis=1) - f(theta)).max() < 1e-12
    idx, w = lagrange4(16, 0.0, 2 * np.pi, theta, periodic=True)
    assert np.allclose(w.sum(axis=1), 1.0)


def test_trace_from_ones_and_exterior_zero():
    g = flower()
    layout = SkeletonLayout.from_skeletons(g.skeletons(33))
    field = SkeletonField.constant(layout, 1.0)
    pou = continuous_pou(g)
    for j in (1, 7):
        tr = assemble_interior_trace(g, j, field, pou)
        for p, f in zip(tr.pieces, tr.funcs):
            t = np.linspace(p.lo, p.hi, 11)
            expected = 0.0 if p.exterior else 1.0
            assert np.abs(f(t) - expected).max() < 1e-13


def test_trace_uses_single_cover_data():
    g = three_disks()
    layout = SkeletonLayout.from_skeletons(g.skeletons(33))
    vals = np.ones(layout.size)
    start = layout.arc_start[(2, 1)]
    vals[start:start + 33] = 0.5
    tr = assemble_interior_trace(g, 1, SkeletonField(layout, vals), continuous_pou(g))
    single = [i for i, p in enumerate(tr.pieces) if p.cover == (2,)]
    assert single
    for i in single:
        p = tr.pieces[i]
        assert np.allclose(tr.funcs[i](np.linspace(p.lo, p.hi, 7)), 0.5)


def test_missing_skeleton_data():
    g = three_disks()
    layout = SkeletonLayout.from_skeletons(g.skeletons(33))

    class Partial:
        skeletons = layout.skeletons

        def arc_values(self, k, j):
            raise KeyError(k)

    with pytest.raises(MissingSkeletonData):
        assemble_interior_trace(g, 1, Partial(), continuous_pou(g))


def test_lens_midpoint_below_one():
    g = build_geometry([Disk(1, (0, 0), 1.0), Disk(2, (1.5, 0), 1.0)])
    layout = SkeletonLayout.from_skeletons(g.skeletons())
    tr = assemble_interior_trace(g, 2, SkeletonField.constant(layout), continuous_pou(g))
    arc = g.skeletons()[1].arc(1)
    mid = SkeletonSample.from_arc(g, arc, arc.n_samples // 2)
    v = eval_at_skeleton_sample(g.disk(2), tr, mid)
    assert 0.0 < v < 1.0
