"""Partitions of unity on the interior boundaries of the disks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ZeroDenominator
from .geometry2d import Geometry2D, inside_mask

KINDS = ("continuous", "discontinuous")

# chooses the neighbor that owns a covered piece: (owner j, cover) -> k
Precedence = Callable[[int, tuple], int]


@dataclass(frozen=True)
class PoUSpec:
    kind: str
    geom: Geometry2D
    precedence: Optional[Precedence] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown partition of unity kind {self.kind!r}")

    def weights(self, j: int, cover: tuple, points) -> np.ndarray:
        """Weights chi_j^k at boundary points of circle j, one column per k in cover.

        The points are assumed to lie on the closure of a piece with the given
        covering set; at piece ends the weights are the limits from inside.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = len(cover)
        if m == 0:
            return np.zeros((len(pts), 0))
        if self.kind == "discontinuous":
            k = self.precedence(j, cover) if self.precedence else min(cover)
            w = np.zeros((len(pts), m))
            w[:, cover.index(k)] = 1.0
            return w
        if m == 1:
            return np.ones((len(pts), 1))
        idx = np.array(cover) - 1
        c = self.geom.centers[idx]
        r = self.geom.radii[idx]
        d = np.hypot(pts[:, None, 0] - c[None, :, 0], pts[:, None, 1] - c[None, :, 1])
        f = np.maximum(0.0, r[None, :] - d)
        total = f.sum(axis=1)
        if np.any(total <= 0.0):
            raise ZeroDenominator(f"circle {j}: no penetration into any of {cover}")
        return f / total[:, None]

    def chi(self, j: int, k: int, x) -> float:
        """chi_j^k at a single point x of circle j (covering set read off the geometry)."""
        x = np.asarray(x, dtype=float).reshape(1, 2)
        nbrs = sorted(self.geom.neighbors(j))
        cover = tuple(i for i, f in zip(nbrs, inside_mask(self.geom, nbrs, x)[0]) if f)
        if k not in cover:
            return 0.0
        return float(self.weights(j, cover, x)[0, cover.index(k)])


def continuous_pou(geom: Geometry2D) -> PoUSpec:
    return PoUSpec("continuous", geom)


def discontinuous_pou(geom: Geometry2D, precedence: Optional[Precedence] = None) -> PoUSpec:
    return PoUSpec("discontinuous", geom, precedence)


def make_pou(geom: Geometry2D, kind: str) -> PoUSpec:
    return continuous_pou(geom) if kind == "continuous" else discontinuous_pou(geom)


def cyclic_precedence(order: tuple[int, ...]) -> Precedence:
    """Owner order[i] takes data from order[i+1] whenever that disk covers the piece.

    For three mutually intersecting disks this reproduces the classic
    assignment chi_1^2 = 1, chi_2^3 = 1, chi_3^1 = 1 on the doubly covered arcs.
    Other pieces fall back to the lowest index.
    """
    succ = {a: order[(i + 1) % len(order)] for i, a in enumerate(order)}

    def choose(j: int, cover: tuple) -> int:
        k = succ.get(j)
        return k if k in cover else min(cover)

    return choose


@dataclass(frozen=True)
class PoUReport:
    max_sum_error: float
    range_violations: int
    exterior_max: float
    max_jump: float
    n_samples: int

    def ok(self, tol: float = 1e-12) -> bool:
        return self.max_sum_error <= tol and self.range_violations == 0 and self.exterior_max == 0.0


def verify_pou(spec: PoUSpec, geom: Geometry2D, samples: int = 1000) -> PoUReport:
    """Sample every piece at `samples` interior points and check the PoU properties."""
    sum_err = 0.0
    bad_range = 0
    ext_max = 0.0
    jump = 0.0
    count = 0
    for j in geom.ids:
        disk = geom.disk(j)
        nbrs = sorted(geom.neighbors(j))
        for piece in geom.pieces(j):
            t = piece.lo + piece.width * (np.arange(samples) + 0.5) / samples
            pts = disk.point_at(t)
            count += samples
            if piece.exterior:
                # an exterior point has no covering neighbor, so every chi is 0
                covered = inside_mask(geom, nbrs, pts).any(axis=1)
                ext_max = max(ext_max, float(covered.sum()))
                continue
            w = spec.weights(j, piece.cover, pts)
            sum_err = max(sum_err, float(np.abs(w.sum(axis=1) - 1.0).max()))
            bad_range += int(np.count_nonzero((w < 0.0) | (w > 1.0)))
            if samples > 1:
                jump = max(jump, float(np.abs(np.diff(w, axis=0)).max()))
    return PoUReport(sum_err, bad_range, ext_max, jump, count)
