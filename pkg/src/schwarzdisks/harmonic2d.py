"""Harmonic extension on a disk via the Poisson integral, and restriction to skeletons.

Every evaluation is expressed as a list of weighted trace evaluations
(row, angle, piece, weight): interior points give Gauss-Legendre nodes of
the Poisson integral, skeleton endpoints on the circle give the two
one-sided boundary limits.  Both the functional API and the precomputed
iteration matrices are built from these lists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_legendre

from .errors import MissingSkeletonData, TooCloseToBoundary
from .geometry2d import TWO_PI, ArcPiece, Disk, Geometry2D, SkeletonArc, locate_piece


@dataclass(frozen=True)
class QuadratureConfig:
    """Poisson-integral discretization.

    nodes_per_piece: Gauss-Legendre nodes per panel.
    near_boundary_refinement: a panel is bisected while its arc length
        exceeds this multiple of its distance to the evaluation point, which
        doubles the resolution per level as the point nears the circle.
    min_distance: relative distance to the circle below which the public
        point evaluation refuses to integrate.
    max_panel_angle: coarsest panel width in radians.
    """

    nodes_per_piece: int = 32
    near_boundary_refinement: float = 3.0
    min_distance: float = 1e-4
    max_panel_angle: float = math.pi / 6

    def __post_init__(self):
        if self.nodes_per_piece < 4:
            raise ValueError("nodes_per_piece must be at least 4")
        if not self.min_distance > 0:
            raise ValueError("min_distance must be positive")
        if not self.near_boundary_refinement > 0:
            raise ValueError("near_boundary_refinement must be positive")
        if not 0 < self.max_panel_angle <= TWO_PI:
            raise ValueError("max_panel_angle must lie in (0, 2*pi]")


@lru_cache(maxsize=16)
def _gauss_legendre(n: int):
    x, w = roots_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class BoundaryTrace:
    """Dirichlet data on circle `owner`, given piecewise.

    funcs[i] maps angles in the closure of pieces[i] to values.
    """

    owner: int
    pieces: tuple[ArcPiece, ...]
    funcs: tuple[Callable[[np.ndarray], np.ndarray], ...]

    def values(self, theta: np.ndarray, piece_idx: np.ndarray) -> np.ndarray:
        out = np.empty(len(theta))
        for i, f in enumerate(self.funcs):
            m = piece_idx == i
            if m.any():
                out[m] = f(theta[m])
        return out

    @classmethod
    def from_function(cls, disk: Disk, g: Callable[[np.ndarray], np.ndarray]) -> "BoundaryTrace":
        """Single-piece trace from a function of boundary points (n, 2)."""
        piece = ArcPiece(disk.id, 0.0, TWO_PI, ())
        return cls(disk.id, (piece,), (lambda t: np.asarray(g(disk.point_at(t)), dtype=float),))


# quadrature ------------------------------------------------------------------

def poisson_functionals(
    disk: Disk,
    pieces: Sequence[ArcPiece],
    points: np.ndarray,
    quad: QuadratureConfig,
    rows: np.ndarray | None = None,
):
    """Quadrature for u(x) = (1/2pi) int K(x, y(t)) g(t) dt at each point.

    Returns (row, theta, piece_index, weight) arrays such that
    u[row] ~ sum weight * g(theta) with g evaluated on the given piece.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    npts = len(pts)
    if rows is None:
        rows = np.arange(npts)
    r = disk.radius
    cx, cy = disk.center
    rel = pts - np.array([cx, cy])
    rho2 = np.einsum("ij,ij->i", rel, rel)
    psi = np.arctan2(rel[:, 1], rel[:, 0])
    gap = r - np.sqrt(rho2)

    lo_list, hi_list, pid_list = [], [], []
    for i, p in enumerate(pieces):
        m = max(1, math.ceil(p.width / quad.max_panel_angle - 1e-12))
        edges = np.linspace(p.lo, p.hi, m + 1)
        lo_list.append(edges[:-1])
        hi_list.append(edges[1:])
        pid_list.append(np.full(m, i))
    base_lo = np.concatenate(lo_list)
    base_hi = np.concatenate(hi_list)
    base_pid = np.concatenate(pid_list)
    nb = len(base_lo)

    pt = np.repeat(np.arange(npts), nb)
    a = np.tile(base_lo, npts)
    b = np.tile(base_hi, npts)
    pid = np.tile(base_pid, npts)

    xg, wg = _gauss_legendre(quad.nodes_per_piece)
    ratio = quad.near_boundary_refinement
    out_pt, out_a, out_b, out_pid = [], [], [], []
    for _level in range(80):
        if len(pt) == 0:
            break
        # distance from the point to the arc [a, b]
        inside = np.mod(psi[pt] - a, TWO_PI) <= (b - a)
        da = np.hypot(rel[pt, 0] - r * np.cos(a), rel[pt, 1] - r * np.sin(a))
        db = np.hypot(rel[pt, 0] - r * np.cos(b), rel[pt, 1] - r * np.sin(b))
        dist = np.where(inside, gap[pt], np.minimum(da, db))
        ok = (b - a) * r <= ratio * dist
        out_pt.append(pt[ok])
        out_a.append(a[ok])
        out_b.append(b[ok])
        out_pid.append(pid[ok])
        keep = ~ok
        pt, a, b, pid = pt[keep], a[keep], b[keep], pid[keep]
        mid = 0.5 * (a + b)
        pt = np.concatenate([pt, pt])
        pid = np.concatenate([pid, pid])
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    else:
        raise RuntimeError("panel refinement did not terminate")

    pt = np.concatenate(out_pt)
    a = np.concatenate(out_a)
    b = np.concatenate(out_b)
    pid = np.concatenate(out_pid)
    half = 0.5 * (b - a)
    theta = (0.5 * (a + b))[:, None] + half[:, None] * xg[None, :]
    wq = half[:, None] * wg[None, :]
    yx = r * np.cos(theta) - rel[pt, 0][:, None]
    yy = r * np.sin(theta) - rel[pt, 1][:, None]
    kern = (r * r - rho2[pt])[:, None] / (yx * yx + yy * yy)
    weight = kern * wq / TWO_PI
    nq = xg.size
    return (
        np.repeat(rows[pt], nq),
        theta.ravel(),
        np.repeat(pid, nq),
        weight.ravel(),
    )


def _check_distance(disk: Disk, points: np.ndarray, quad: QuadratureConfig):
    d = disk.radius - np.hypot(points[:, 0] - disk.center[0], points[:, 1] - disk.center[1])
    if np.any(d <= quad.min_distance * disk.radius):
        i = int(np.argmin(d))
        raise TooCloseToBoundary(
            f"point {points[i].tolist()} is within {quad.min_distance:g}*r of circle {disk.id}"
        )


def poisson_eval(disk: Disk, trace: BoundaryTrace, x, quad: QuadratureConfig = QuadratureConfig()):
    """Harmonic extension of `trace` evaluated at interior point(s) x.

    A single point (shape (2,)) gives a float, an (n, 2) array gives n values.
    """
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    _check_distance(disk, pts, quad)
    row, theta, pid, w = poisson_functionals(disk, trace.pieces, pts, quad)
    vals = np.bincount(row, weights=w * trace.values(theta, pid), minlength=len(pts))
    return float(vals[0]) if x.ndim == 1 else vals


# skeleton endpoints -----------------------------------------------------------

def endpoint_functional(disk: Disk, pieces: Sequence[ArcPiece], point, direction):
    """Limit of the harmonic extension at a boundary point approached along `direction`.

    Near a jump of piecewise-continuous data at boundary point p, the harmonic
    extension behaves like the half-plane solution b + (a - b) * phi / pi,
    where a, b are the one-sided data limits on the decreasing/increasing
    angle sides and phi is the angle between the approach direction and the
    increasing-angle tangent.  Returns ((theta_minus, piece_minus, w_minus),
    (theta_plus, piece_plus, w_plus)).
    """
    cx, cy = disk.center
    t = math.atan2(point[1] - cy, point[0] - cx)
    los = np.array([p.lo for p in pieces])
    off = np.abs(np.mod(t - los + math.pi, TWO_PI) - math.pi)
    ip = int(np.argmin(off))
    im = (ip - 1) % len(pieces)
    tangent = np.array([-math.sin(t), math.cos(t)])
    inward = -np.array([math.cos(t), math.sin(t)])
    v = np.asarray(direction, dtype=float)
    phi = math.atan2(float(v @ inward), float(v @ tangent))
    phi = min(max(phi, 0.0), math.pi)
    if len(pieces) == 1 or off[ip] > 1e-7:
        # no breakpoint here: the data is continuous, take its value
        idx, tt = locate_piece(pieces, np.array([t]))
        return (float(tt[0]), int(idx[0]), 1.0), (float(tt[0]), int(idx[0]), 0.0)
    return (pieces[im].hi, im, phi / math.pi), (pieces[ip].lo, ip, 1.0 - phi / math.pi)


def arc_direction(arc: SkeletonArc, k_disk: Disk, index: int) -> np.ndarray:
    """Unit tangent at sample `index` of a skeleton arc, pointing into the arc."""
    t = arc.angles[index]
    forward = np.array([-math.sin(t), math.cos(t)])
    return -forward if index == arc.n_samples - 1 else forward


def skeleton_functionals(geom: Geometry2D, j: int, arcs: Sequence[SkeletonArc], quad: QuadratureConfig):
    """Functionals for R_j E_j at every sample of the given arcs (rows in arc order)."""
    disk = geom.disk(j)
    pieces = geom.pieces(j)
    pts = np.concatenate([a.points for a in arcs])
    endpoint = np.concatenate([a.endpoint for a in arcs])
    rows = np.arange(len(pts))
    parts = [poisson_functionals(disk, pieces, pts[~endpoint], quad, rows[~endpoint])]
    er, et, ep, ew = [], [], [], []
    start = 0
    for arc in arcs:
        kdisk = geom.disk(arc.neighbor)
        for i in np.flatnonzero(arc.endpoint):
            terms = endpoint_functional(disk, pieces, arc.points[i], arc_direction(arc, kdisk, i))
            for theta, pid, w in terms:
                er.append(start + i)
                et.append(theta)
                ep.append(pid)
                ew.append(w)
        start += arc.n_samples
    parts.append((np.array(er, dtype=int), np.array(et), np.array(ep, dtype=int), np.array(ew)))
    return tuple(np.concatenate(z) for z in zip(*parts))


@dataclass(frozen=True)
class SkeletonSample:
    """One sample of S_{j,k}: a point of circle k in the closure of disk j."""

    point: np.ndarray
    on_boundary: bool
    direction: np.ndarray  # unit tangent along the arc, pointing into the arc

    @classmethod
    def from_arc(cls, geom: Geometry2D, arc: SkeletonArc, index: int) -> "SkeletonSample":
        return cls(
            arc.points[index],
            bool(arc.endpoint[index]),
            arc_direction(arc, geom.disk(arc.neighbor), index),
        )


def eval_at_skeleton_sample(disk: Disk, trace: BoundaryTrace, sample: SkeletonSample,
                            quad: QuadratureConfig = QuadratureConfig()) -> float:
    if sample.on_boundary:
        terms = endpoint_functional(disk, trace.pieces, sample.point, sample.direction)
        return float(sum(w * trace.funcs[pid](np.array([theta]))[0] for theta, pid, w in terms))
    row, theta, pid, w = poisson_functionals(disk, trace.pieces, sample.point[None, :], quad)
    return float(np.sum(w * trace.values(theta, pid)))


# interior traces ---------------------------------------------------------------

def lagrange4(n: int, lo: float, hi: float, theta: np.ndarray, periodic: bool = False):
    """Four-point Lagrange interpolation weights on an equispaced grid of n samples.

    The grid is lo + i*h with h = (hi - lo)/(n - 1) (closed arc) or
    h = (hi - lo)/n (periodic).  Returns (indices, weights), both (m, 4).
    """
    theta = np.asarray(theta, dtype=float)
    if periodic:
        h = (hi - lo) / n
        u = np.mod(theta - lo, hi - lo) / h
        i0 = np.floor(u).astype(int) - 1
    else:
        h = (hi - lo) / (n - 1)
        u = np.clip((theta - lo) / h, 0.0, n - 1.0)
        i0 = np.clip(np.floor(u).astype(int) - 1, 0, n - 4)
    s = u - i0  # position relative to the first stencil node, nodes at 0,1,2,3
    w = np.stack(
        [
            -(s - 1) * (s - 2) * (s - 3) / 6.0,
            s * (s - 2) * (s - 3) / 2.0,
            -s * (s - 1) * (s - 3) / 2.0,
            s * (s - 1) * (s - 2) / 6.0,
        ],
        axis=-1,
    )
    idx = i0[:, None] + np.arange(4)[None, :]
    if periodic:
        idx = np.mod(idx, n)
    return idx, w


def source_arcs(geom: Geometry2D, skeletons, j: int) -> dict[int, SkeletonArc]:
    """For each neighbor k of j, the arc S_{k,j} of circle j carrying field_k."""
    out = {}
    for k in geom.neighbors(j):
        try:
            out[k] = skeletons[k - 1].arc(j)
        except KeyError:
            pass
    return out


def trace_stencil(geom: Geometry2D, j: int, pou, arcs: dict, theta: np.ndarray, piece_idx: np.ndarray):
    """Linear map from neighbor skeleton samples to trace values at (theta, piece).

    Returns (node, neighbor, sample, weight) arrays: trace[node] =
    sum weight * field_neighbor[sample] over entries with that node.
    Nodes on exterior pieces get no entries.
    """
    pieces = geom.pieces(j)
    disk = geom.disk(j)
    nodes, nbr, smp, wts = [], [], [], []
    for i, piece in enumerate(pieces):
        sel = np.flatnonzero(piece_idx == i)
        if piece.exterior or sel.size == 0:
            continue
        th = theta[sel]
        chi = pou.weights(j, piece.cover, disk.point_at(th))
        for c, k in enumerate(piece.cover):
            arc = arcs.get(k)
            if arc is None:
                raise MissingSkeletonData(f"no samples for skeleton arc S_({k},{j})")
            if arc.full_circle:
                idx, w = lagrange4(arc.n_samples, arc.lo, arc.hi, th, periodic=True)
            else:
                mid = 0.5 * (arc.lo + arc.hi)
                rel = mid + np.mod(th - mid + math.pi, TWO_PI) - math.pi
                idx, w = lagrange4(arc.n_samples, arc.lo, arc.hi, rel)
            w = w * chi[:, c:c + 1]
            nodes.append(np.repeat(sel, 4))
            nbr.append(np.full(sel.size * 4, k))
            smp.append(idx.ravel())
            wts.append(w.ravel())
    if not nodes:
        z = np.zeros(0, dtype=int)
        return z, z, z, np.zeros(0)
    return np.concatenate(nodes), np.concatenate(nbr), np.concatenate(smp), np.concatenate(wts)


def assemble_interior_trace(geom: Geometry2D, j: int, field, pou,
                            exterior: Callable[[np.ndarray], np.ndarray] | None = None) -> BoundaryTrace:
    """Dirichlet data on circle j from neighbor skeleton values blended by the PoU.

    `field` must provide `arc_values(k, j)` returning the values of field_k
    on the arc S_{k,j}.  Exterior pieces carry `exterior(points)` or 0.
    """
    skeletons = field.skeletons
    arcs = source_arcs(geom, skeletons, j)
    pieces = geom.pieces(j)
    disk = geom.disk(j)
    data = {}
    for k in arcs:
        try:
            data[k] = np.asarray(field.arc_values(k, j), dtype=float)
        except KeyError:
            raise MissingSkeletonData(f"field has no values on S_({k},{j})") from None

    def make(i: int, piece: ArcPiece):
        if piece.exterior:
            if exterior is None:
                return lambda t: np.zeros(np.shape(t))
            return lambda t: np.asarray(exterior(disk.point_at(t)), dtype=float)

        def f(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            node, nbr, smp, w = trace_stencil(geom, j, pou, arcs, t, np.full(t.size, i))
            vals = np.zeros(t.size)
            for k in np.unique(nbr):
                m = nbr == k
                vals += np.bincount(node[m], weights=w[m] * data[k][smp[m]], minlength=t.size)
            return vals

        return f

    return BoundaryTrace(j, pieces, tuple(make(i, p) for i, p in enumerate(pieces)))
