"""Command-line interface: gen, run, layers, stats, verify.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error
(including a failing verify suite).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile

import numpy as np

from .errors import InsufficientIterations, SchwarzError
from .generators import GeneratorSpec, generate
from .geometry2d import format_disks2d, load_geometry
from .harmonic2d import QuadratureConfig
from .layers import DEFAULT_N_DIRS, peel_layers_2d, peel_layers_3d
from .molecules3d import RadiiConvention, build_balls, molecule_stats, parse_balls3d, parse_molecule
from .pou import make_pou
from .schwarz import (
    BoundaryData,
    IterationOperator,
    asymptotic_factor,
    run_error_recursion,
    solve_psm,
)

log = logging.getLogger("schwarzdisks")

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    write_atomic(path, buf.getvalue())


def _quad(args) -> QuadratureConfig:
    kw = {}
    if args.quad_nodes is not None:
        kw["nodes_per_piece"] = args.quad_nodes
    if args.min_distance is not None:
        kw["min_distance"] = args.min_distance
    return QuadratureConfig(**kw)


def cmd_gen(args) -> int:
    spacing = args.spacing
    spec = GeneratorSpec(args.family, args.size, args.radius, spacing)
    geom = generate(spec)
    write_atomic(args.out, format_disks2d(geom.disks))
    print(f"disks={geom.n} family={spec.family}")
    return 0


def cmd_run(args) -> int:
    geom = load_geometry(args.geometry)
    op = IterationOperator.build(geom, make_pou(geom, args.pou), _quad(args),
                                 samples_per_arc=args.samples_per_arc, threads=args.threads)
    if args.mode == "error":
        report = run_error_recursion(op, args.iterations)
    else:
        _, report = solve_psm(op, BoundaryData.parse(args.g), n_iters=args.iterations)
    first = report.first_contraction_index
    ratios = report.ratios
    rows = [
        (i + 1, report.norms[i], ratios[i], int(first == i + 1))
        for i in range(report.n_iters)
    ]
    write_csv(args.out, ["iter", "norm_inf", "ratio", "first_contraction_flag"], rows)
    try:
        factor = fmt(asymptotic_factor(report))
    except InsufficientIterations:
        factor = "nan"
    print(f"first_contraction={first if first is not None else 'none'} asymptotic_factor={factor} "
          f"n_max={op.layers.n_max} iterations={report.n_iters}")
    return 0


def cmd_layers(args) -> int:
    with open(args.geometry, encoding="utf-8") as fh:
        text = fh.read()
    if args.three_d:
        layers = peel_layers_3d(parse_balls3d(text), n_dirs=args.n_dirs)
    else:
        from .geometry2d import build_geometry, parse_disks2d
        layers = peel_layers_2d(build_geometry(parse_disks2d(text)))
    write_csv(args.out, ["id", "layer"], [(j, m) for j, m in enumerate(layers.layer_of, start=1)])
    print(f"n_max={layers.n_max}")
    return 0


def cmd_stats(args) -> int:
    with open(args.molecule, encoding="utf-8") as fh:
        atoms = parse_molecule(fh.read())
    kind = "vdw_scaled" if args.radii == "vdw" else "sas"
    conv = RadiiConvention(kind, scale=args.scale, probe=args.probe)
    stats = molecule_stats(build_balls(atoms, conv), n_dirs=args.n_dirs)
    row = stats.as_row()
    write_csv(args.out, list(row), [list(row.values())])
    print(" ".join(f"{k}={fmt(v)}" for k, v in row.items()))
    return 0


def cmd_verify(args) -> int:
    from .verify import verify_suite

    results = verify_suite(_quad(args), args.pou, args.seed, args.threads)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    n_pass = sum(r.passed for r in results)
    print(f"passed={n_pass} failed={len(results) - n_pass}")
    return 0 if n_pass == len(results) else 2


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="schwarzdisks", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--log-level", choices=sorted(LOG_LEVELS), default="quiet")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a generated geometry")
    g.add_argument("--family", choices=["chain", "hex", "quad", "tri"], required=True)
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--spacing", type=float, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    def quad_flags(sp):
        sp.add_argument("--quad-nodes", type=int, default=None)
        sp.add_argument("--min-distance", type=float, default=None)

    r = sub.add_parser("run", help="error recursion or PSM solve")
    r.add_argument("--geometry", required=True)
    r.add_argument("--iterations", type=int, default=100)
    r.add_argument("--pou", choices=["continuous", "discontinuous"], default="continuous")
    r.add_argument("--mode", choices=["error", "solve"], default="error")
    r.add_argument("--g", default="zero")
    r.add_argument("--samples-per-arc", type=int, default=129)
    r.add_argument("--out", required=True)
    quad_flags(r)
    r.set_defaults(func=cmd_run)

    lay = sub.add_parser("layers", help="layer peeling")
    lay.add_argument("--geometry", required=True)
    lay.add_argument("--3d", dest="three_d", action="store_true")
    lay.add_argument("--n-dirs", type=int, default=DEFAULT_N_DIRS)
    lay.add_argument("--out", required=True)
    lay.set_defaults(func=cmd_layers)

    st = sub.add_parser("stats", help="molecular geometry statistics")
    st.add_argument("--molecule", required=True)
    st.add_argument("--radii", choices=["vdw", "sas"], default="vdw")
    st.add_argument("--scale", type=float, default=1.1)
    st.add_argument("--probe", type=float, default=1.4)
    st.add_argument("--n-dirs", type=int, default=DEFAULT_N_DIRS)
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_stats)

    v = sub.add_parser("verify", help="run the built-in property suite")
    v.add_argument("--pou", choices=["continuous", "discontinuous"], default="continuous")
    quad_flags(v)
    v.set_defaults(func=cmd_verify)
    return p


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("level=%(levelname)s logger=%(name)s %(message)s"))
    root = logging.getLogger("schwarzdisks")
    root.handlers[:] = [handler]
    root.setLevel(LOG_LEVELS[level])
    root.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    _setup_logging(args.log_level)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 1
    args.threads = args.threads or os.cpu_count() or 1
    try:
        return args.func(args)
    except (SchwarzError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a bug or resource failure
        log.exception("runtime failure")
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
