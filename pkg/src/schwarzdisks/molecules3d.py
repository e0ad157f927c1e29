"""Molecular ball unions: parsing, radius conventions and geometric statistics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import Disconnected, ParseError, UnknownElement
from .layers import DEFAULT_N_DIRS, Ball, ball_neighbors, cover_counts, peel_layers_3d


@lru_cache(maxsize=1)
def uff_radii() -> Mapping[str, float]:
    text = resources.files("schwarzdisks").joinpath("data/uff_radii.json").read_text(encoding="utf-8")
    return dict(json.loads(text)["radii"])


def normalize_element(sym: str) -> str:
    return sym[:1].upper() + sym[1:].lower()


@dataclass(frozen=True)
class Atom:
    element: str
    position: tuple[float, float, float]
    radius_override: Optional[float] = None

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError("atom position must be three finite numbers")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class RadiiConvention:
    kind: str = "vdw_scaled"
    scale: float = 1.1
    probe: float = 1.4
    base_table: Mapping[str, float] = field(default_factory=uff_radii)

    def __post_init__(self):
        if self.kind not in ("vdw_scaled", "sas"):
            raise ValueError(f"unknown radii convention {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not self.probe >= 0:
            raise ValueError("probe must be nonnegative")

    def radius(self, atom: Atom) -> float:
        base = atom.radius_override
        if base is None:
            el = normalize_element(atom.element)
            if el not in self.base_table:
                raise UnknownElement(f"no radius for element {atom.element!r}")
            base = self.base_table[el]
        return self.scale * base if self.kind == "vdw_scaled" else base + self.probe


def _looks_like_record(parts: list[str]) -> bool:
    if not (parts[0].isalpha() and len(parts[0]) <= 3) or len(parts) < 2:
        return False
    try:
        float(parts[1])
    except ValueError:
        return False
    return True


def parse_molecule(text: str, table: Mapping[str, float] | None = None) -> list[Atom]:
    """Extended XYZ: optional atom count, optional comment, `El x y z [radius]` lines."""
    table = uff_radii() if table is None else table
    lines = text.splitlines()
    start = 0
    count = None
    head = lines[0].split() if lines else []
    if len(head) == 1 and head[0].isdigit():
        # standard XYZ: count line, then a free-form comment line
        count = int(head[0])
        start = 2
    elif head and not _looks_like_record(head):
        start = 1
    atoms = []
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) not in (4, 5):
            raise ParseError(f"expected 'Element x y z [radius]', got {raw.strip()!r}", lineno)
        try:
            xyz = tuple(float(v) for v in parts[1:4])
            override = float(parts[4]) if len(parts) == 5 else None
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if override is not None and not override > 0:
            raise ParseError("radius must be positive", lineno)
        if override is None and normalize_element(parts[0]) not in table:
            raise UnknownElement(f"line {lineno}: no radius for element {parts[0]!r}")
        try:
            atoms.append(Atom(parts[0], xyz, override))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if count is not None and count != len(atoms):
        raise ParseError(f"count line says {count} atoms, found {len(atoms)}", 1)
    return atoms


def build_balls(atoms: Sequence[Atom], conv: RadiiConvention = RadiiConvention()) -> list[Ball]:
    return [Ball(i + 1, a.position, conv.radius(a)) for i, a in enumerate(atoms)]


@dataclass(frozen=True)
class MoleculeStats:
    n_atoms: int
    n_layers: int
    avg_neighbors: float
    avg_max_intersection_degree: float
    avg_overlap: float

    def as_row(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "n_layers": self.n_layers,
            "avg_neighbors": self.avg_neighbors,
            "avg_max_intersection_degree": self.avg_max_intersection_degree,
            "avg_overlap": self.avg_overlap,
        }


def _connected(nbrs: list[np.ndarray]) -> bool:
    seen = np.zeros(len(nbrs), dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        j = stack.pop()
        for k in nbrs[j]:
            if not seen[k]:
                seen[k] = True
                stack.append(int(k))
    return bool(seen.all())


def molecule_stats(balls: Sequence[Ball], n_dirs: int = DEFAULT_N_DIRS,
                   exposure_eps: float | None = None) -> MoleculeStats:
    """Neighbor counts, intersection degree, overlap and layer count of a ball union.

    The maximum intersection degree of a ball is one plus the largest number
    of neighbors simultaneously covering a sampled point of its sphere, i.e.
    the number of subdomains meeting there including the ball itself.
    """
    if len(balls) < 2:
        raise ValueError("need at least two balls")
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    nbrs = ball_neighbors(centers, radii)
    if not _connected(nbrs):
        raise Disconnected("the union of balls is not connected")
    degree = np.array([len(nb) for nb in nbrs])
    overlaps = []
    max_deg = np.empty(len(balls))
    for j, nb in enumerate(nbrs):
        upper = nb[nb > j]
        if upper.size:
            d = np.linalg.norm(centers[upper] - centers[j], axis=1)
            overlaps.append(radii[j] + radii[upper] - d)
        max_deg[j] = 1 + cover_counts(centers, radii, j, nb, n_dirs).max()
    layers = peel_layers_3d(balls, n_dirs, exposure_eps)
    return MoleculeStats(
        n_atoms=len(balls),
        n_layers=layers.n_max,
        avg_neighbors=float(degree.mean()),
        avg_max_intersection_degree=float(max_deg.mean()),
        avg_overlap=float(np.concatenate(overlaps).mean()),
    )


def parse_balls3d(text: str) -> list[Ball]:
    """`# balls3d v1` header followed by `id x y z r` records."""
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if first is None or lines[first].strip() != "# balls3d v1":
        raise ParseError("missing header '# balls3d v1'", (first or 0) + 1)
    balls = []
    for lineno, raw in enumerate(lines[first + 1:], start=first + 2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(f"expected 'id x y z r', got {raw.strip()!r}", lineno)
        try:
            balls.append(Ball(int(parts[0]), tuple(float(v) for v in parts[1:4]), float(parts[4])))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    ids = [b.id for b in balls]
    if sorted(ids) != list(range(1, len(balls) + 1)):
        raise ParseError("ball ids must be unique and contiguous 1..N", first + 1)
    return sorted(balls, key=lambda b: b.id)


def icosahedral_cluster(radius: float = 1.0, distance: float = 1.4) -> list[Ball]:
    """A center ball plus twelve equal balls at the icosahedron vertices."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    v = np.array(verts)
    v /= np.linalg.norm(v, axis=1)[:, None]
    balls = [Ball(1, (0.0, 0.0, 0.0), radius)]
    balls += [Ball(i + 2, tuple(distance * radius * p), radius) for i, p in enumerate(v)]
    return balls
