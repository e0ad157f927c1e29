"""Parallel Schwarz iteration on skeleton fields.

The iteration operator T is linear, so each block row j (the new values on
S_j) is assembled once as a dense matrix acting on the neighbor samples
that lie on circle j.  Exterior Dirichlet data enters as an affine term.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InsufficientIterations, NoExteriorBoundary
from .geometry2d import DEFAULT_SAMPLES_PER_ARC, Geometry2D, Skeleton
from .harmonic2d import (
    QuadratureConfig,
    skeleton_functionals,
    source_arcs,
    trace_stencil,
)
from .layers import LayerAssignment, peel_layers_2d
from .pou import PoUSpec, continuous_pou

log = logging.getLogger(__name__)

TOL_CONTR = 1e-6
TAU = 1e-8
UNDERFLOW = 1e-13
DEFAULT_WINDOW = 20


@dataclass(frozen=True)
class SkeletonLayout:
    """Flat indexing of all skeleton samples: block j holds S_j, arcs in neighbor order."""

    skeletons: tuple[Skeleton, ...]
    offsets: np.ndarray  # block j spans offsets[j-1]:offsets[j]
    arc_start: dict  # (owner, neighbor) -> first flat index of S_{owner,neighbor}
    endpoint: np.ndarray  # flat mask of samples lying on the owner's circle
    points: np.ndarray  # flat (n, 2) sample coordinates

    @classmethod
    def from_skeletons(cls, skeletons) -> "SkeletonLayout":
        skeletons = tuple(skeletons)
        offsets = [0]
        arc_start = {}
        for sk in skeletons:
            pos = offsets[-1]
            for arc in sk.arcs:
                arc_start[(sk.owner, arc.neighbor)] = pos
                pos += arc.n_samples
            offsets.append(pos)
        endpoint = np.concatenate([sk.endpoint for sk in skeletons])
        points = np.concatenate([sk.points for sk in skeletons])
        for arr in (endpoint, points):
            arr.flags.writeable = False
        return cls(skeletons, np.array(offsets), arc_start, endpoint, points)

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    @property
    def n_blocks(self) -> int:
        return len(self.skeletons)

    def block(self, j: int) -> slice:
        return slice(int(self.offsets[j - 1]), int(self.offsets[j]))


@dataclass(frozen=True)
class SkeletonField:
    layout: SkeletonLayout
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.layout.size,):
            raise ValueError(f"field has shape {v.shape}, layout needs ({self.layout.size},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def skeletons(self):
        return self.layout.skeletons

    def block(self, j: int) -> np.ndarray:
        return self.values[self.layout.block(j)]

    def arc_values(self, owner: int, neighbor: int) -> np.ndarray:
        start = self.layout.arc_start[(owner, neighbor)]
        n = self.layout.skeletons[owner - 1].arc(neighbor).n_samples
        return self.values[start:start + n]

    def norm_inf(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    @classmethod
    def constant(cls, layout: SkeletonLayout, c: float = 1.0) -> "SkeletonField":
        return cls(layout, np.full(layout.size, float(c)))

    @classmethod
    def from_points(cls, layout: SkeletonLayout, f: Callable[[np.ndarray], np.ndarray]) -> "SkeletonField":
        return cls(layout, np.asarray(f(layout.points), dtype=float))


def random_smooth_field(layout: SkeletonLayout, rng: np.random.Generator,
                        lo: float = 0.0, hi: float = 1.0, degree: int = 3) -> SkeletonField:
    """Per-arc trigonometric polynomials of low degree, rescaled into [lo, hi]."""
    vals = np.empty(layout.size)
    pos = 0
    k = np.arange(1, degree + 1)
    for sk in layout.skeletons:
        for arc in sk.arcs:
            s = np.linspace(0.0, 1.0, arc.n_samples)
            a = rng.normal(size=degree) / k
            b = rng.normal(size=degree) / k
            f = rng.normal() + np.cos(np.pi * np.outer(s, k)) @ a + np.sin(np.pi * np.outer(s, k)) @ b
            f = (f - f.min()) / max(f.max() - f.min(), 1e-300)
            u, v = np.sort(rng.uniform(lo, hi, 2))
            vals[pos:pos + arc.n_samples] = u + (v - u) * f
            pos += arc.n_samples
    return SkeletonField(layout, vals)


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data g on the exterior boundary.

    kind is one of zero, constant, linear-x, linear-y, custom; `value` is the
    constant, `func` maps points (n, 2) to values for the custom kind.
    """

    kind: str = "zero"
    value: float = 0.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "linear-x", "linear-y", "custom"):
            raise ValueError(f"unknown boundary data kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom boundary data needs a function")

    @classmethod
    def parse(cls, text: str) -> "BoundaryData":
        if text == "zero":
            return cls("zero")
        if text in ("linear-x", "linear-y"):
            return cls(text)
        if text.startswith("const:"):
            try:
                return cls("constant", float(text[6:]))
            except ValueError:
                raise ValueError(f"bad constant in {text!r}") from None
        raise ValueError(f"unknown boundary data {text!r}")

    def affine_coefficients(self):
        """(c0, cx, cy) with g = c0 + cx*x + cy*y, or None for custom data."""
        return {
            "zero": (0.0, 0.0, 0.0),
            "constant": (self.value, 0.0, 0.0),
            "linear-x": (0.0, 1.0, 0.0),
            "linear-y": (0.0, 0.0, 1.0),
        }.get(self.kind)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.func(p), dtype=float)
        c0, cx, cy = self.affine_coefficients()
        return c0 + cx * p[:, 0] + cy * p[:, 1]


@dataclass(frozen=True)
class _Block:
    matrix: np.ndarray  # rows: samples of S_j, cols: entries of `cols`
    cols: np.ndarray  # flat indices of neighbor samples on circle j
    affine: np.ndarray  # (3, rows): responses to exterior data 1, x, y


def _build_block(geom, pou, quad, layout: SkeletonLayout, j: int) -> _Block:
    skeletons = layout.skeletons
    arcs = skeletons[j - 1].arcs
    nrows = sum(a.n_samples for a in arcs)
    row, theta, pid, w = skeleton_functionals(geom, j, arcs, quad)
    pieces = geom.pieces(j)
    ext = np.array([p.exterior for p in pieces])[pid]

    src = source_arcs(geom, skeletons, j)
    ks = sorted(src)
    local = np.zeros(geom.n + 1, dtype=np.int64)
    cols = []
    ncols = 0
    for k in ks:
        local[k] = ncols
        start = layout.arc_start[(k, j)]
        cols.append(np.arange(start, start + src[k].n_samples))
        ncols += src[k].n_samples
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)

    ii = np.flatnonzero(~ext)
    node, nbr, smp, wt = trace_stencil(geom, j, pou, src, theta[ii], pid[ii])
    flat = row[ii][node].astype(np.int64) * ncols + local[nbr] + smp
    mat = np.bincount(flat, weights=w[ii][node] * wt, minlength=nrows * ncols).reshape(nrows, ncols)

    ee = np.flatnonzero(ext)
    pts = geom.disk(j).point_at(theta[ee])
    affine = np.stack(
        [
            np.bincount(row[ee], weights=w[ee] * basis, minlength=nrows)
            for basis in (np.ones(len(ee)), pts[:, 0], pts[:, 1])
        ]
    ) if len(ee) else np.zeros((3, nrows))
    mat.flags.writeable = False
    affine.flags.writeable = False
    return _Block(mat, cols, affine)


@dataclass(frozen=True)
class IterationOperator:
    geom: Geometry2D
    pou: PoUSpec
    quad: QuadratureConfig
    layout: SkeletonLayout
    blocks: tuple[_Block, ...]
    layers: LayerAssignment
    threads: int = 1
    _custom_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def build(cls, geom: Geometry2D, pou: PoUSpec | None = None,
              quad: QuadratureConfig = QuadratureConfig(),
              samples_per_arc: int = DEFAULT_SAMPLES_PER_ARC,
              threads: int | None = None) -> "IterationOperator":
        pou = pou if pou is not None else continuous_pou(geom)
        threads = threads or os.cpu_count() or 1
        layout = SkeletonLayout.from_skeletons(geom.skeletons(samples_per_arc))
        for j in geom.ids:  # fill the partition cache before any worker reads it
            geom.pieces(j)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                blocks = list(pool.map(lambda j: _build_block(geom, pou, quad, layout, j), geom.ids))
        else:
            blocks = [_build_block(geom, pou, quad, layout, j) for j in geom.ids]
        log.debug("operator built: %d subdomains, %d samples", geom.n, layout.size)
        return cls(geom, pou, quad, layout, tuple(blocks), peel_layers_2d(geom), threads)

    def apply(self, values: np.ndarray, g: BoundaryData | None = None) -> np.ndarray:
        out = np.empty(self.layout.size)
        offs = self.layout.offsets
        shift = self.exterior_term(g) if g is not None and g.kind != "zero" else None
        for j, blk in enumerate(self.blocks):
            out[offs[j]:offs[j + 1]] = blk.matrix @ values[blk.cols]
        if shift is not None:
            out += shift
        return out

    def exterior_term(self, g: BoundaryData) -> np.ndarray:
        """Response of all skeleton samples to exterior data g with zero interior data."""
        coef = g.affine_coefficients()
        if coef is not None:
            return np.concatenate([np.asarray(coef) @ blk.affine for blk in self.blocks])
        key = id(g)
        if key not in self._custom_cache:
            parts = []
            for j in self.geom.ids:
                arcs = self.layout.skeletons[j - 1].arcs
                nrows = sum(a.n_samples for a in arcs)
                row, theta, pid, w = skeleton_functionals(self.geom, j, arcs, self.quad)
                ext = np.array([p.exterior for p in self.geom.pieces(j)])[pid]
                pts = self.geom.disk(j).point_at(theta[ext])
                parts.append(np.bincount(row[ext], weights=w[ext] * g(pts), minlength=nrows))
            self._custom_cache[key] = (g, np.concatenate(parts))
        return self._custom_cache[key][1]

    def block_norms(self) -> np.ndarray:
        """Max absolute row sum of every block (the discrete operator norm per row)."""
        return np.array([np.abs(b.matrix).sum(axis=1).max() if b.matrix.size else 0.0 for b in self.blocks])


def apply_T(op: IterationOperator, field_: SkeletonField) -> SkeletonField:
    if field_.layout is not op.layout and field_.layout.size != op.layout.size:
        raise ValueError("field is not aligned with the operator skeletons")
    return SkeletonField(op.layout, op.apply(field_.values))


@dataclass(frozen=True)
class RunReport:
    """Per-iteration history.  Index i of every array refers to iterate i+1."""

    norms: np.ndarray
    sub_max: np.ndarray  # (iters, N) max |e_j| over all samples of S_j
    sub_int_max: np.ndarray  # (iters, N) max |e_j| over interior samples
    sub_min: np.ndarray  # (iters, N) min e_j over all samples
    layers: LayerAssignment
    initial_norm: float = 1.0
    tol_contr: float = TOL_CONTR
    tau: float = TAU
    mode: str = "error"

    @property
    def n_iters(self) -> int:
        return len(self.norms)

    @property
    def first_contraction_index(self) -> int | None:
        hit = np.flatnonzero(self.norms < (1.0 - self.tol_contr) * self.initial_norm)
        return int(hit[0]) + 1 if hit.size else None

    @property
    def ratios(self) -> np.ndarray:
        prev = np.concatenate([[self.initial_norm], self.norms[:-1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(prev > 0, self.norms / prev, np.nan)

    def in_V(self, iterate: int, n: int) -> bool:
        """Iterate `iterate` lies in V_n: layers <= n contracted on interior samples,
        deeper layers still equal to 1 on their whole skeletons."""
        i = iterate - 1
        lay = np.asarray(self.layers.layer_of)
        shallow = lay <= n
        ok_shallow = np.all(self.sub_int_max[i, shallow] < 1.0 - self.tol_contr)
        ok_deep = np.all(self.sub_min[i, ~shallow] >= 1.0 - self.tau)
        return bool(ok_shallow and ok_deep)

    def in_C(self, iterate: int, n: int) -> bool:
        i = iterate - 1
        lay = np.asarray(self.layers.layer_of)
        return bool(np.all(self.sub_max[i, lay <= n] < 1.0 - self.tol_contr))

    @property
    def v_flags(self) -> list:
        """For iterate n <= N_max: membership of T^n 1 in V_n."""
        return [self.in_V(n, n) for n in range(1, min(self.n_iters, self.layers.n_max) + 1)]

    @property
    def c_levels(self) -> list:
        """For each iterate, the largest n with the iterate in C_n (0 if none)."""
        out = []
        for i in range(1, self.n_iters + 1):
            level = 0
            while level < self.layers.n_max and self.in_C(i, level + 1):
                level += 1
            out.append(level)
        return out

    def layer_sup(self, iterate: int, all_samples: bool = True) -> dict:
        """Max |e| per layer at an iterate."""
        arr = self.sub_max if all_samples else self.sub_int_max
        lay = np.asarray(self.layers.layer_of)
        return {m: float(arr[iterate - 1, lay == m].max()) for m in range(1, self.layers.n_max + 1)}


def _iterate(op: IterationOperator, init: np.ndarray, n_iters: int, g: BoundaryData | None,
             stop_tol: float, increments: bool, tol_contr: float, mode: str):
    lay = op.layout
    interior = ~lay.endpoint
    offs = lay.offsets
    nblk = lay.n_blocks
    int_idx = [np.flatnonzero(interior[offs[j]:offs[j + 1]]) for j in range(nblk)]
    norms, smax, simax, smin = [], [], [], []
    u = np.array(init, dtype=float)
    shift = op.exterior_term(g) if g is not None and g.kind != "zero" else None
    for _ in range(n_iters):
        new = op.apply(u)
        if shift is not None:
            new += shift
        track = np.abs(new - u) if increments else np.abs(new)
        norms.append(float(track.max()))
        smax.append([track[offs[j]:offs[j + 1]].max() for j in range(nblk)])
        simax.append([track[offs[j]:offs[j + 1]][int_idx[j]].max() if int_idx[j].size else -np.inf
                      for j in range(nblk)])
        smin.append([new[offs[j]:offs[j + 1]].min() for j in range(nblk)])
        u = new
        if norms[-1] < stop_tol:
            break
    init_norm = float(np.abs(init).max()) if not increments else (norms[0] if norms else 1.0)
    report = RunReport(np.array(norms), np.array(smax), np.array(simax), np.array(smin),
                       op.layers, init_norm if init_norm > 0 else 1.0, tol_contr, TAU, mode)
    return u, report


def run_error_recursion(op: IterationOperator, n_iters: int = 100, tol_contr: float = TOL_CONTR) -> RunReport:
    """Iterate e <- T e from the all-ones field."""
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    _, report = _iterate(op, np.ones(op.layout.size), n_iters, None, UNDERFLOW, False, tol_contr, "error")
    return report


def solve_psm(op: IterationOperator, g: BoundaryData, init: SkeletonField | None = None,
              n_iters: int = 1000, stop_tol: float = 1e-13) -> tuple[SkeletonField, RunReport]:
    """Parallel Schwarz iteration with Dirichlet data g; the report tracks increments."""
    if not op.geom.has_exterior():
        raise NoExteriorBoundary("no subdomain has an exterior arc")
    u0 = np.zeros(op.layout.size) if init is None else init.values
    u, report = _iterate(op, u0, n_iters, g, stop_tol, True, TOL_CONTR, "solve")
    return SkeletonField(op.layout, u), report


def operator_norm_estimate(op: IterationOperator, n: int) -> float:
    """||T^n 1||_inf, which equals the operator norm of T^n for a positive operator."""
    if n < 1:
        raise ValueError("n must be at least 1")
    u = np.ones(op.layout.size)
    for _ in range(n):
        u = op.apply(u)
    return float(np.abs(u).max())


def fit_factor(norms, window: int = DEFAULT_WINDOW) -> float:
    """exp of the least-squares slope of log(norm) over the last `window` entries."""
    norms = np.asarray(norms, dtype=float)
    usable = norms[norms >= UNDERFLOW]
    if len(usable) < window + 1 or window < 2:
        raise InsufficientIterations(
            f"need at least {window + 1} iterates above {UNDERFLOW:g}, have {len(usable)}"
        )
    tail = usable[-window:]
    n = np.arange(len(tail), dtype=float)
    slope = np.polyfit(n, np.log(tail), 1)[0]
    return float(math.exp(slope))


def asymptotic_factor(report: RunReport, window: int = DEFAULT_WINDOW) -> float:
    return fit_factor(report.norms, window)


@dataclass(frozen=True)
class MonotonicityReport:
    trials: int
    max_violation: float  # max over samples of (T v - T u), should be <= tau
    max_expansion: float  # max of ||T w|| - ||w|| over random fields w
    max_worst_case_gap: float  # max of ||T^n w|| - ||T^n 1|| over random w with ||w|| = 1

    def ok(self, tau: float = TAU) -> bool:
        return self.max_violation <= tau and self.max_expansion <= tau and self.max_worst_case_gap <= tau


def monotonicity_check(op: IterationOperator, trials: int = 100, seed: int = 0, powers: int = 3) -> MonotonicityReport:
    """Random ordered pairs v <= u in [0, 1]: check T v <= T u, non-expansiveness,
    and that the all-ones field dominates ||T^n w|| for ||w|| = 1."""
    rng = np.random.default_rng(seed)
    viol = -np.inf
    expand = -np.inf
    gap = -np.inf
    ones = np.ones(op.layout.size)
    ref = []
    for _ in range(powers):
        ones = op.apply(ones)
        ref.append(np.abs(ones).max())
    for _ in range(trials):
        v = random_smooth_field(op.layout, rng).values
        w = random_smooth_field(op.layout, rng).values
        u = v + (1.0 - v) * w
        viol = max(viol, float((op.apply(v) - op.apply(u)).max()))
        s = random_smooth_field(op.layout, rng, -1.0, 1.0).values
        s = s / np.abs(s).max()
        ts = s
        for n in range(powers):
            ts = op.apply(ts)
            if n == 0:
                expand = max(expand, float(np.abs(ts).max() - 1.0))
            gap = max(gap, float(np.abs(ts).max() - ref[n]))
    return MonotonicityReport(trials, viol, expand, gap)
