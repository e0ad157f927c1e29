"""Deterministic test geometries: chains, hexagonal and square clusters."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidSpec, SchwarzError
from .geometry2d import Disk, Geometry2D, build_geometry

FAMILIES = ("chain", "hex_layers", "quad_layers", "tri_lattice")
ALIASES = {"hex": "hex_layers", "quad": "quad_layers", "tri": "tri_lattice"}
DEFAULT_SPACING = {"chain": 1.5, "hex_layers": 1.5, "quad_layers": 1.4, "tri_lattice": 1.5}


@dataclass(frozen=True)
class GeneratorSpec:
    """`size` is the disk count for chains, the layer count for hex/quad
    clusters and the side length (disks per row) for triangular patches.
    `spacing` is the center-to-center distance as an absolute length; None
    picks the family default relative to the radius."""

    family: str
    size: int
    radius: float = 1.0
    spacing: float | None = None

    def __post_init__(self):
        fam = ALIASES.get(self.family, self.family)
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}")
        if self.spacing is None:
            object.__setattr__(self, "spacing", DEFAULT_SPACING[fam] * self.radius)
        r, s = self.radius, self.spacing
        if not r > 0:
            raise InvalidSpec("radius must be positive")
        if not 0 < s < 2 * r:
            raise InvalidSpec(f"spacing {s} must lie in (0, 2*radius)")
        if self.size < 2:
            raise InvalidSpec(f"size must be at least 2 for {fam}")
        if fam == "hex_layers" and s >= math.sqrt(3.0) * r:
            # six neighbors at distance s cover a circle only if acos(s/2r) > pi/6
            raise InvalidSpec("hex_layers needs spacing < sqrt(3)*radius so inner disks are covered")
        if fam == "quad_layers" and math.sqrt(2.0) * s >= 2 * r:
            raise InvalidSpec("quad_layers needs sqrt(2)*spacing < 2*radius (diagonal overlap)")


def chain_centers(n: int, s: float):
    return [(i * s, 0.0) for i in range(n)]


def hex_centers(n_layers: int, s: float):
    """Hexagon of rings 0..L-1 in axial coordinates, ordered row by row."""
    m = n_layers - 1
    out = []
    for q_r in range(-m, m + 1):
        for q in range(-m, m + 1):
            if max(abs(q), abs(q_r), abs(q + q_r)) <= m:
                out.append((s * (q + 0.5 * q_r), s * q_r * math.sqrt(3.0) / 2.0))
    return out


def quad_centers(n_layers: int, s: float):
    m = n_layers - 1
    return [(s * ix, s * iy) for iy in range(-m, m + 1) for ix in range(-m, m + 1)]


def tri_centers(n: int, s: float):
    """n x n patch of the triangular lattice with alternate rows offset."""
    return [
        (s * (ix + 0.5 * (iy % 2)), s * iy * math.sqrt(3.0) / 2.0)
        for iy in range(n)
        for ix in range(n)
    ]


def generate(spec: GeneratorSpec) -> Geometry2D:
    builders = {
        "chain": chain_centers,
        "hex_layers": hex_centers,
        "quad_layers": quad_centers,
        "tri_lattice": tri_centers,
    }
    centers = builders[spec.family](spec.size, spec.spacing)
    disks = [Disk(i + 1, c, spec.radius) for i, c in enumerate(centers)]
    try:
        return build_geometry(disks)
    except SchwarzError as exc:
        raise InvalidSpec(f"{spec.family}: {exc}") from exc


def chain(n: int, radius: float = 1.0, spacing: float | None = None) -> Geometry2D:
    return generate(GeneratorSpec("chain", n, radius, spacing))


def hex_layers(n_layers: int, radius: float = 1.0, spacing: float | None = None) -> Geometry2D:
    return generate(GeneratorSpec("hex_layers", n_layers, radius, spacing))


def quad_layers(n_layers: int, radius: float = 1.0, spacing: float | None = None) -> Geometry2D:
    return generate(GeneratorSpec("quad_layers", n_layers, radius, spacing))


def tri_lattice(n: int, radius: float = 1.0, spacing: float | None = None) -> Geometry2D:
    return generate(GeneratorSpec("tri_lattice", n, radius, spacing))


def random_cluster(n: int, rng, radius_range=(0.6, 1.4), max_tries: int = 1000) -> Geometry2D:
    """Random connected union of n disks grown by attaching to existing disks.

    Draws that hit tangency or produce degenerate boundary pieces are redrawn.
    """
    for _ in range(max_tries):
        disks = []
        for i in range(n):
            r = rng.uniform(*radius_range)
            if i == 0:
                c = (0.0, 0.0)
            else:
                parent = disks[rng.integers(len(disks))]
                ang = rng.uniform(0.0, 2.0 * math.pi)
                dist = rng.uniform(0.3, 0.95) * (parent.radius + r)
                c = (parent.center[0] + dist * math.cos(ang), parent.center[1] + dist * math.sin(ang))
            disks.append(Disk(i + 1, c, r))
        try:
            geom = build_geometry(disks)
            for j in geom.ids:
                geom.pieces(j)
            return geom
        except SchwarzError:
            continue
    raise InvalidSpec(f"could not draw a valid random cluster of {n} disks")
