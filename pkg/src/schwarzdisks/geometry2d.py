"""Unions of intersecting disks: validation, boundary partition and skeletons.

Angles are measured in the local polar frame of each circle, so the point of
circle j at angle t is c_j + r_j (cos t, sin t).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateArc,
    Disconnected,
    NoIntersection,
    ParseError,
    TangentIntersection,
)

TWO_PI = 2.0 * math.pi
DEFAULT_TOLERANCE = 1e-9
DEFAULT_SAMPLES_PER_ARC = 129
HEADER = "# disks2d v1"


@dataclass(frozen=True)
class Disk:
    id: int
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        cx, cy = (float(v) for v in self.center)
        object.__setattr__(self, "center", (cx, cy))
        object.__setattr__(self, "radius", float(self.radius))
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError(f"disk {self.id}: center must be finite")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"disk {self.id}: radius must be positive, got {self.radius}")

    def point_at(self, theta):
        """Point(s) of the circle at local angle(s) theta."""
        t = np.asarray(theta, dtype=float)
        return np.stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)],
            axis=-1,
        )

    def angle_of(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.arctan2(p[..., 1] - self.center[1], p[..., 0] - self.center[0])


@dataclass(frozen=True)
class ArcPiece:
    """Maximal arc of circle `owner` with a constant covering set.

    The angular interval is [lo, hi) with lo < hi <= lo + 2*pi.  An empty
    `cover` means the arc lies on the exterior boundary of the union.
    """

    owner: int
    lo: float
    hi: float
    cover: tuple[int, ...]

    @property
    def exterior(self) -> bool:
        return not self.cover

    @property
    def label(self):
        return "EXTERIOR" if self.exterior else self.cover

    @property
    def multiplicity(self) -> int:
        return len(self.cover)

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class SkeletonArc:
    """S_{j,k}: the closed arc of circle k (neighbor) lying in the closure of disk j (owner).

    `angles` are local angles on circle k, increasing from lo to hi.
    """

    owner: int
    neighbor: int
    lo: float
    hi: float
    angles: np.ndarray
    points: np.ndarray
    endpoint: np.ndarray  # bool mask: sample lies on circle `owner`

    @property
    def full_circle(self) -> bool:
        return self.hi - self.lo >= TWO_PI

    @property
    def n_samples(self) -> int:
        return len(self.angles)


@dataclass(frozen=True)
class Skeleton:
    owner: int
    arcs: tuple[SkeletonArc, ...]

    @property
    def n_samples(self) -> int:
        return sum(a.n_samples for a in self.arcs)

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([a.points for a in self.arcs])

    @property
    def endpoint(self) -> np.ndarray:
        return np.concatenate([a.endpoint for a in self.arcs])

    def arc(self, k: int) -> SkeletonArc:
        for a in self.arcs:
            if a.neighbor == k:
                return a
        raise KeyError(k)


@dataclass(frozen=True)
class Geometry2D:
    disks: tuple[Disk, ...]
    neighbor_sets: tuple[frozenset, ...]
    tolerance: float = DEFAULT_TOLERANCE
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.disks)

    @property
    def ids(self) -> range:
        return range(1, self.n + 1)

    def disk(self, j: int) -> Disk:
        return self.disks[j - 1]

    def neighbors(self, j: int) -> frozenset:
        return self.neighbor_sets[j - 1]

    @cached_property
    def centers(self) -> np.ndarray:
        c = np.array([d.center for d in self.disks], dtype=float)
        c.flags.writeable = False
        return c

    @cached_property
    def radii(self) -> np.ndarray:
        r = np.array([d.radius for d in self.disks], dtype=float)
        r.flags.writeable = False
        return r

    def edges(self) -> list[tuple[int, int]]:
        return [(j, k) for j in self.ids for k in sorted(self.neighbors(j)) if j < k]

    def pieces(self, j: int) -> tuple[ArcPiece, ...]:
        """Cached partition_boundary(self, j)."""
        key = ("pieces", j)
        if key not in self._cache:
            self._cache[key] = partition_boundary(self, j)
        return self._cache[key]

    def skeletons(self, samples_per_arc: int = DEFAULT_SAMPLES_PER_ARC) -> tuple[Skeleton, ...]:
        key = ("skeletons", samples_per_arc)
        if key not in self._cache:
            self._cache[key] = build_skeletons(self, samples_per_arc)
        return self._cache[key]

    def has_exterior(self) -> bool:
        return any(p.exterior for j in self.ids for p in self.pieces(j))


def build_geometry(disks: Sequence[Disk], tolerance: float = DEFAULT_TOLERANCE) -> Geometry2D:
    disks = tuple(disks)
    if len(disks) < 2:
        raise ValueError("need at least two disks")
    ids = [d.id for d in disks]
    if sorted(ids) != list(range(1, len(disks) + 1)):
        raise ValueError("disk ids must be unique and contiguous 1..N")
    disks = tuple(sorted(disks, key=lambda d: d.id))
    n = len(disks)
    c = np.array([d.center for d in disks])
    r = np.array([d.radius for d in disks])
    nbrs: list[set] = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            dist = math.hypot(c[a, 0] - c[b, 0], c[a, 1] - c[b, 1])
            scale = tolerance * max(r[a], r[b])
            pen = r[a] + r[b] - dist
            if pen < 0:
                continue
            if pen <= scale:
                raise TangentIntersection(f"disks {a + 1} and {b + 1} are tangent (penetration {pen:.3g})")
            if abs(dist - abs(r[a] - r[b])) <= scale:
                raise TangentIntersection(f"disks {a + 1} and {b + 1} are internally tangent")
            nbrs[a].add(b + 1)
            nbrs[b].add(a + 1)
    if not any(nbrs):
        raise NoIntersection("no pair of disks intersects")
    seen = {1}
    queue = deque([1])
    while queue:
        j = queue.popleft()
        for k in nbrs[j - 1]:
            if k not in seen:
                seen.add(k)
                queue.append(k)
    if len(seen) != n:
        missing = sorted(set(range(1, n + 1)) - seen)
        raise Disconnected(f"disks {missing[:10]} are not connected to disk 1")
    return Geometry2D(disks, tuple(frozenset(s) for s in nbrs), tolerance)


def covered_interval(dj: Disk, dk: Disk):
    """Angular interval of circle j strictly inside disk k.

    Returns (center_angle, half_width) with half_width in [0, pi];
    half_width == pi means the whole circle is covered, 0 means none of it.
    """
    dx = dk.center[0] - dj.center[0]
    dy = dk.center[1] - dj.center[1]
    d = math.hypot(dx, dy)
    rj, rk = dj.radius, dk.radius
    if d == 0.0:
        return 0.0, (math.pi if rk > rj else 0.0)
    cos_t = (d * d + rj * rj - rk * rk) / (2.0 * d * rj)
    if cos_t >= 1.0:
        half = 0.0
    elif cos_t <= -1.0:
        half = math.pi
    else:
        half = math.acos(cos_t)
    return math.atan2(dy, dx), half


def inside_mask(geom: Geometry2D, ids: Iterable[int], points: np.ndarray) -> np.ndarray:
    """Boolean (n_points, n_ids): point strictly inside disk k."""
    ids = list(ids)
    if not ids:
        return np.zeros((len(points), 0), dtype=bool)
    c = geom.centers[np.array(ids) - 1]
    r = geom.radii[np.array(ids) - 1]
    d = np.hypot(points[:, None, 0] - c[None, :, 0], points[:, None, 1] - c[None, :, 1])
    return d < r[None, :]


def partition_boundary(geom: Geometry2D, j: int) -> tuple[ArcPiece, ...]:
    dj = geom.disk(j)
    nbrs = sorted(geom.neighbors(j))
    breaks = []
    for k in nbrs:
        mid, half = covered_interval(dj, geom.disk(k))
        if 0.0 < half < math.pi:
            breaks.append((mid - half) % TWO_PI)
            breaks.append((mid + half) % TWO_PI)
    if not breaks:
        p = dj.point_at(np.array([0.0]))
        cov = tuple(k for k, inside in zip(nbrs, inside_mask(geom, nbrs, p)[0]) if inside)
        return (ArcPiece(j, 0.0, TWO_PI, cov),)
    b = np.sort(np.array(breaks))
    b = np.append(b, b[0] + TWO_PI)
    widths = np.diff(b)
    if widths.min() < geom.tolerance:
        i = int(widths.argmin())
        raise DegenerateArc(f"circle {j}: piece of width {widths[i]:.3g} rad at angle {b[i]:.6f}")
    mids = 0.5 * (b[:-1] + b[1:])
    inside = inside_mask(geom, nbrs, dj.point_at(mids))
    covers = [tuple(k for k, f in zip(nbrs, row) if f) for row in inside]
    pieces: list[list] = []
    for lo, hi, cov in zip(b[:-1], b[1:], covers):
        if pieces and pieces[-1][2] == cov:
            pieces[-1][1] = hi
        else:
            pieces.append([lo, hi, cov])
    if len(pieces) > 1 and pieces[0][2] == pieces[-1][2]:
        # coverage does not change across the first breakpoint: restart there
        first, last = pieces[0], pieces[-1]
        pieces = [[last[0], first[1] + TWO_PI, last[2]]] + [
            [lo + TWO_PI, hi + TWO_PI, cov] for lo, hi, cov in pieces[1:-1]
        ]
    out = tuple(ArcPiece(j, float(lo), float(hi), cov) for lo, hi, cov in pieces)
    total = sum(p.width for p in out)
    assert abs(total - TWO_PI) < 1e-10, total
    return out


def locate_piece(pieces: Sequence[ArcPiece], theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the piece containing each angle, and the angle unwrapped into [lo0, lo0 + 2pi)."""
    lo0 = pieces[0].lo
    t = lo0 + np.mod(np.asarray(theta, dtype=float) - lo0, TWO_PI)
    his = np.array([p.hi for p in pieces])
    idx = np.minimum(np.searchsorted(his, t, side="right"), len(pieces) - 1)
    return idx, t


def build_skeletons(geom: Geometry2D, samples_per_arc: int = DEFAULT_SAMPLES_PER_ARC) -> tuple[Skeleton, ...]:
    if samples_per_arc < 4:
        raise ValueError("samples_per_arc must be at least 4")
    out = []
    for j in geom.ids:
        dj = geom.disk(j)
        arcs = []
        for k in sorted(geom.neighbors(j)):
            dk = geom.disk(k)
            mid, half = covered_interval(dk, dj)
            if half == 0.0:
                continue
            if half >= math.pi:
                lo, hi = 0.0, TWO_PI
                angles = np.linspace(lo, hi, samples_per_arc, endpoint=False)
            else:
                lo, hi = mid - half, mid + half
                angles = np.linspace(lo, hi, samples_per_arc)
            pts = dk.point_at(angles)
            dist = np.abs(np.hypot(pts[:, 0] - dj.center[0], pts[:, 1] - dj.center[1]) - dj.radius)
            endpoint = dist <= geom.tolerance * dj.radius
            if half < math.pi:
                endpoint[0] = endpoint[-1] = True
            for arr in (angles, pts, endpoint):
                arr.flags.writeable = False
            arcs.append(SkeletonArc(j, k, float(lo), float(hi), angles, pts, endpoint))
        out.append(Skeleton(j, tuple(arcs)))
    return tuple(out)


def merged_cover_length(intervals: list[tuple[float, float]]) -> float:
    """Total length of a union of open arcs given as (center, half_width)."""
    segs = []
    for mid, half in intervals:
        if half >= math.pi:
            return TWO_PI
        if half <= 0.0:
            continue
        lo = (mid - half) % TWO_PI
        hi = lo + 2.0 * half
        if hi > TWO_PI:
            segs.append((lo, TWO_PI))
            segs.append((0.0, hi - TWO_PI))
        else:
            segs.append((lo, hi))
    segs.sort()
    total = 0.0
    cur_lo = cur_hi = None
    for lo, hi in segs:
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return min(total, TWO_PI)


def exposure_fraction_2d(geom: Geometry2D, j: int, active) -> float:
    if j not in active:
        raise ValueError(f"disk {j} is not in the active set")
    dj = geom.disk(j)
    ivs = [covered_interval(dj, geom.disk(k)) for k in geom.neighbors(j) if k in active]
    return max(0.0, 1.0 - merged_cover_length(ivs) / TWO_PI)


# text format ----------------------------------------------------------------

def parse_disks2d(text: str) -> list[Disk]:
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if first is None or lines[first].strip() != HEADER:
        raise ParseError(f"missing header '{HEADER}'", (first or 0) + 1)
    disks = []
    for lineno, raw in enumerate(lines[first + 1:], start=first + 2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 'id cx cy r', got {raw.strip()!r}", lineno)
        try:
            did = int(parts[0])
            cx, cy, r = (float(v) for v in parts[1:])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        try:
            disks.append(Disk(did, (cx, cy), r))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return disks


def format_disks2d(disks: Iterable[Disk]) -> str:
    rows = [HEADER]
    for d in disks:
        rows.append(f"{d.id} {d.center[0]!r} {d.center[1]!r} {d.radius!r}")
    return "\n".join(rows) + "\n"


def load_geometry(path, tolerance: float = DEFAULT_TOLERANCE) -> Geometry2D:
    with open(path, encoding="utf-8") as fh:
        return build_geometry(parse_disks2d(fh.read()), tolerance)
