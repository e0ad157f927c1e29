"""Boundary-node detection and layer peeling for unions of disks and balls."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoBoundaryNode

EXPOSURE_EPS_2D = 1e-6
DEFAULT_N_DIRS = 4096


@dataclass(frozen=True)
class AdjacencyGraph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise ValueError("graph must be loop-free")

    def neighbors(self, j: int) -> set:
        return {b if a == j else a for a, b in self.edges if j in (a, b)}


@dataclass(frozen=True)
class LayerAssignment:
    layer_of: tuple[int, ...]  # layer_of[j-1] is the layer of vertex j

    @property
    def n_max(self) -> int:
        return max(self.layer_of)

    def layer(self, m: int) -> list[int]:
        return [j + 1 for j, lay in enumerate(self.layer_of) if lay == m]


def peel_layers(exposure: Callable[[int, frozenset], float], vertices: Iterable[int],
                exposure_eps: float) -> LayerAssignment:
    """Repeatedly strip the exposed vertices of the remaining union."""
    active = set(vertices)
    layer_of = {}
    m = 0
    while active:
        m += 1
        frozen = frozenset(active)
        exposed = {j for j in sorted(active) if exposure(j, frozen) > exposure_eps}
        if not exposed:
            raise NoBoundaryNode(f"no exposed vertex among {len(active)} remaining")
        for j in exposed:
            layer_of[j] = m
        active -= exposed
    return LayerAssignment(tuple(layer_of[j] for j in sorted(layer_of)))


def peel_layers_2d(geom, exposure_eps: float = EXPOSURE_EPS_2D) -> LayerAssignment:
    from .geometry2d import exposure_fraction_2d

    return peel_layers(lambda j, act: exposure_fraction_2d(geom, j, act), geom.ids, exposure_eps)


def check_layer_chain(layers: LayerAssignment, neighbors: Callable[[int], Iterable[int]]) -> bool:
    """Every vertex of layer m >= 2 has a neighbor in layer m - 1."""
    lay = layers.layer_of
    for j, m in enumerate(lay, start=1):
        if m >= 2 and not any(lay[k - 1] == m - 1 for k in neighbors(j)):
            return False
    return True


# 3D ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    id: int
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3 or not all(math.isfinite(v) for v in c):
            raise ValueError(f"ball {self.id}: center must be three finite numbers")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"ball {self.id}: radius must be positive")


@lru_cache(maxsize=8)
def fibonacci_sphere(n: int) -> np.ndarray:
    """n quasi-uniform unit vectors on the sphere (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * np.arange(n)
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    pts.flags.writeable = False
    return pts


def _arrays(balls: Sequence[Ball]):
    return np.array([b.center for b in balls], dtype=float), np.array([b.radius for b in balls], dtype=float)


def cover_counts(centers: np.ndarray, radii: np.ndarray, j: int, others: np.ndarray, n_dirs: int) -> np.ndarray:
    """Number of balls in `others` (0-based) strictly containing each sample point of sphere j."""
    pts = centers[j] + radii[j] * fibonacci_sphere(n_dirs)
    if len(others) == 0:
        return np.zeros(n_dirs, dtype=int)
    diff = pts[:, None, :] - centers[others][None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return (d2 < radii[others][None, :] ** 2).sum(axis=1)


def exposure_fraction_3d(balls: Sequence[Ball], j: int, active, n_dirs: int = DEFAULT_N_DIRS) -> float:
    """Fraction of Fibonacci directions on sphere j not inside another active ball."""
    if n_dirs < 100:
        raise ValueError("n_dirs must be at least 100")
    if j not in active:
        raise ValueError(f"ball {j} is not in the active set")
    centers, radii = _arrays(balls)
    ids = np.array([k for k in active if k != j], dtype=int) - 1
    if ids.size:
        d = np.linalg.norm(centers[ids] - centers[j - 1], axis=1)
        ids = ids[d < radii[ids] + radii[j - 1]]
    covered = cover_counts(centers, radii, j - 1, ids, n_dirs) > 0
    return float(1.0 - covered.mean())


def ball_neighbors(centers: np.ndarray, radii: np.ndarray, tolerance: float = 1e-9) -> list[np.ndarray]:
    """0-based neighbor index arrays: pairs with positive penetration depth."""
    tree = cKDTree(centers)
    pairs = tree.query_pairs(2.0 * float(radii.max()), output_type="ndarray")
    out = [[] for _ in range(len(centers))]
    if len(pairs):
        a, b = pairs[:, 0], pairs[:, 1]
        d = np.linalg.norm(centers[a] - centers[b], axis=1)
        pen = radii[a] + radii[b] - d
        keep = pen > tolerance * np.maximum(radii[a], radii[b])
        for i, k in zip(a[keep], b[keep]):
            out[i].append(k)
            out[k].append(i)
    return [np.array(sorted(x), dtype=int) for x in out]


def peel_layers_3d(balls: Sequence[Ball], n_dirs: int = DEFAULT_N_DIRS,
                   exposure_eps: float | None = None) -> LayerAssignment:
    """Layer peeling with sampled sphere exposure.

    A covered ball only needs re-testing after one of its neighbors was
    peeled, since exposure can only grow as the active set shrinks.
    """
    if exposure_eps is None:
        exposure_eps = 2.0 / n_dirs
    centers, radii = _arrays(balls)
    nbrs = ball_neighbors(centers, radii)
    n = len(balls)
    active = np.ones(n, dtype=bool)
    layer = np.zeros(n, dtype=int)
    exposure = np.full(n, np.nan)
    stale = np.ones(n, dtype=bool)
    m = 0
    while active.any():
        m += 1
        for j in np.flatnonzero(active & stale):
            others = nbrs[j][active[nbrs[j]]]
            covered = cover_counts(centers, radii, j, others, n_dirs) > 0
            exposure[j] = 1.0 - covered.mean()
        stale[:] = False
        peel = active & (exposure > exposure_eps)
        if not peel.any():
            raise NoBoundaryNode(f"no exposed ball among {int(active.sum())} remaining")
        layer[peel] = m
        active &= ~peel
        for j in np.flatnonzero(peel):
            stale[nbrs[j]] = True
    return LayerAssignment(tuple(int(v) for v in layer))
