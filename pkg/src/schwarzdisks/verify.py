"""Built-in property suite run by the `verify` command."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .generators import chain, hex_layers, quad_layers, random_cluster
from .geometry2d import Disk
from .harmonic2d import BoundaryTrace, QuadratureConfig, poisson_eval
from .layers import check_layer_chain, peel_layers_2d, peel_layers_3d
from .molecules3d import icosahedral_cluster
from .pou import make_pou, verify_pou
from .schwarz import IterationOperator, monotonicity_check, run_error_recursion

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_harmonic_oracle(quad: QuadratureConfig, n_points: int = 400, seed: int = 0) -> CheckResult:
    disk = Disk(1, (0.25, -0.5), 1.3)
    rng = np.random.default_rng(seed)
    rad = np.sqrt(rng.uniform(0.0, 0.81, n_points)) * disk.radius
    ang = rng.uniform(0.0, 2.0 * np.pi, n_points)
    pts = np.c_[disk.center[0] + rad * np.cos(ang), disk.center[1] + rad * np.sin(ang)]
    worst = 0.0
    for m in range(9):
        for part in (np.real, np.imag):
            def g(p, m=m, part=part):
                z = (p[:, 0] - disk.center[0]) + 1j * (p[:, 1] - disk.center[1])
                return part((z / disk.radius) ** m)
            vals = poisson_eval(disk, BoundaryTrace.from_function(disk, g), pts, quad)
            worst = max(worst, float(np.abs(vals - g(pts)).max()))
    return CheckResult("harmonic_oracle", worst <= 1e-8, f"max error {worst:.3e}")


def check_pou(kind: str, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    geoms = [hex_layers(3), quad_layers(2)] + [random_cluster(int(rng.integers(5, 16)), rng) for _ in range(3)]
    worst = 0.0
    ok = True
    for g in geoms:
        rep = verify_pou(make_pou(g, kind), g, 200)
        worst = max(worst, rep.max_sum_error)
        ok &= rep.ok()
    return CheckResult(f"pou_sums_{kind}", ok, f"max |sum - 1| {worst:.3e}")


def check_operator(kind: str, quad: QuadratureConfig, seed: int, threads: int) -> list[CheckResult]:
    g = hex_layers(2)
    op = IterationOperator.build(g, make_pou(g, kind), quad, threads=threads)
    mono = monotonicity_check(op, trials=10, seed=seed)
    rep = run_error_recursion(op, 5)
    return [
        CheckResult("monotonicity", mono.max_violation <= 1e-8, f"max violation {mono.max_violation:.3e}"),
        CheckResult("non_expansive", mono.max_expansion <= 1e-8, f"max expansion {mono.max_expansion:.3e}"),
        CheckResult("worst_initialization", mono.max_worst_case_gap <= 1e-8,
                    f"max gap {mono.max_worst_case_gap:.3e}"),
        CheckResult("first_contraction", rep.first_contraction_index == 3,
                    f"hex_layers(2) first contraction {rep.first_contraction_index}"),
    ]


def check_layers() -> CheckResult:
    found = {
        "chain(5)": peel_layers_2d(chain(5)).n_max,
        "hex_layers(3)": peel_layers_2d(hex_layers(3)).n_max,
        "quad_layers(3)": peel_layers_2d(quad_layers(3)).n_max,
        "core_shell": peel_layers_3d(icosahedral_cluster()).n_max,
    }
    want = {"chain(5)": 1, "hex_layers(3)": 3, "quad_layers(3)": 3, "core_shell": 2}
    g = hex_layers(3)
    chain_ok = check_layer_chain(peel_layers_2d(g), g.neighbors)
    return CheckResult("layer_peeling", found == want and chain_ok, str(found))


def verify_suite(quad: QuadratureConfig = QuadratureConfig(), pou_kind: str = "continuous",
                 seed: int = 0, threads: int = 1) -> list[CheckResult]:
    results = []
    steps = [
        lambda: [check_pou(pou_kind, seed)],
        lambda: [check_harmonic_oracle(quad, seed=seed)],
        lambda: check_operator(pou_kind, quad, seed, threads),
        lambda: [check_layers()],
    ]
    for step in steps:
        t0 = time.perf_counter()
        try:
            out = step()
        except Exception as exc:  # a crash is reported as a failed check
            out = [CheckResult(getattr(step, "__name__", "check"), False, f"error: {exc}")]
        for r in out:
            log.info("check=%s passed=%s detail=%s seconds=%.2f", r.name, r.passed, r.detail,
                     time.perf_counter() - t0)
        results.extend(out)
    return results
