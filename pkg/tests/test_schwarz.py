import numpy as np
import pytest

from schwarzdisks.errors import InsufficientIterations, NoExteriorBoundary
from schwarzdisks.generators import chain, hex_layers
from schwarzdisks.geometry2d import Disk, build_geometry
from schwarzdisks.harmonic2d import SkeletonSample, assemble_interior_trace, eval_at_skeleton_sample
from schwarzdisks.pou import continuous_pou, discontinuous_pou
from schwarzdisks.schwarz import (
    BoundaryData,
    IterationOperator,
    SkeletonField,
    apply_T,
    fit_factor,
    monotonicity_check,
    operator_norm_estimate,
    random_smooth_field,
    run_error_recursion,
    solve_psm,
)

from _support import build_operator, flower, hex_operator, three_disks


def test_lens_contracts_on_interior():
    g = build_geometry([Disk(1, (0, 0), 1.0), Disk(2, (1.5, 0), 1.0)])
    op = build_operator(g)
    out = apply_T(op, SkeletonField.constant(op.layout))
    interior = ~op.layout.endpoint
    assert out.values[interior].max() < 1.0
    assert out.values.min() > 0.0


def test_flower_center_stays_one():
    op = build_operator(flower())
    out = apply_T(op, SkeletonField.constant(op.layout))
    assert np.abs(out.block(7) - 1.0).max() < 1e-12
    assert out.block(1)[~op.layout.skeletons[0].endpoint].max() < 1.0


def test_zero_field():
    op = build_operator(flower())
    assert np.all(apply_T(op, SkeletonField.constant(op.layout, 0.0)).values == 0.0)


def test_block_sparsity():
    op = hex_operator(2)
    lay = op.layout
    owner = np.searchsorted(lay.offsets, np.arange(lay.size), side="right")
    for j, blk in enumerate(op.blocks, start=1):
        assert set(owner[blk.cols]) <= set(op.geom.neighbors(j))


@pytest.mark.parametrize("pou_kind", ["continuous", "discontinuous"])
def test_matrix_matches_functional_path(pou_kind):
    g = three_disks()
    pou = continuous_pou(g) if pou_kind == "continuous" else discontinuous_pou(g)
    op = IterationOperator.build(g, pou, samples_per_arc=17, threads=1)
    rng = np.random.default_rng(0)
    f = random_smooth_field(op.layout, rng)
    fast = op.apply(f.values)
    slow = []
    for sk in op.layout.skeletons:
        j = sk.owner
        tr = assemble_interior_trace(g, j, f, pou)
        for arc in sk.arcs:
            for i in range(arc.n_samples):
                slow.append(eval_at_skeleton_sample(g.disk(j), tr, SkeletonSample.from_arc(g, arc, i)))
    assert np.abs(fast - np.array(slow)).max() < 1e-12


def test_threads_do_not_change_result():
    g = hex_layers(2)
    a = IterationOperator.build(g, threads=1)
    b = IterationOperator.build(g, threads=3)
    for x, y in zip(a.blocks, b.blocks):
        assert np.array_equal(x.matrix, y.matrix)


def test_chain_single_layer():
    op = build_operator(chain(5))
    rep = run_error_recursion(op, 10)
    assert rep.first_contraction_index == 1
    assert np.all(rep.ratios < 1.0)
    assert operator_norm_estimate(op, 1) < 1.0


def test_operator_norm_estimate_hex2():
    op = hex_operator(2)
    assert operator_norm_estimate(op, 1) >= 1 - 1e-6
    assert operator_norm_estimate(op, 2) >= 1 - 1e-6
    assert operator_norm_estimate(op, 3) < 1 - 1e-6
    with pytest.raises(ValueError):
        operator_norm_estimate(op, 0)


def test_run_report_flags_hex2():
    rep = run_error_recursion(hex_operator(2), 6)
    assert rep.first_contraction_index == 3
    assert rep.v_flags == [True, True]
    assert rep.c_levels[:3] == [0, 0, 2]
    assert np.all(np.diff(rep.norms) <= 1e-8)


def test_fit_factor_exact_geometric():
    norms = 3.0 * 0.7 ** np.arange(1, 41)
    assert fit_factor(norms, 20) == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(InsufficientIterations):
        fit_factor(norms[:10], 20)
    with pytest.raises(InsufficientIterations):
        fit_factor(np.r_[norms[:5], np.full(30, 1e-20)], 20)


def test_solve_constant_and_zero():
    op = hex_operator(2)
    u, rep = solve_psm(op, BoundaryData("constant", 1.0))
    assert np.abs(u.values - 1.0).max() < 1e-10
    ones = SkeletonField.constant(op.layout)
    _, rep0 = solve_psm(op, BoundaryData("zero"), init=ones, n_iters=15, stop_tol=0.0)
    err = run_error_recursion(op, 15)
    # increments of the zero-data solve equal e^n - e^(n+1); compare iterates directly
    u = ones.values
    for n in range(15):
        u = op.apply(u)
        assert np.abs(u).max() == pytest.approx(err.norms[n], rel=0, abs=0)
    assert rep0.n_iters == 15


def test_solve_linear_y():
    op = hex_operator(2)
    u, rep = solve_psm(op, BoundaryData("linear-y"))
    assert np.abs(u.values - op.layout.points[:, 1]).max() < 1e-6
    assert rep.norms[-1] < 1e-12


def test_solve_custom_data():
    op = hex_operator(2)
    g = BoundaryData("custom", func=lambda p: p[:, 0] ** 2 - p[:, 1] ** 2)
    u, _ = solve_psm(op, g)
    pts = op.layout.points
    assert np.abs(u.values - (pts[:, 0] ** 2 - pts[:, 1] ** 2)).max() < 1e-5


def test_no_exterior_boundary():
    class Geom:
        def has_exterior(self):
            return False

    class Op:
        geom = Geom()

    with pytest.raises(NoExteriorBoundary):
        solve_psm(Op(), BoundaryData("zero"))


def test_boundary_data_parse():
    assert BoundaryData.parse("const:2.5").value == 2.5
    assert BoundaryData.parse("linear-x")(np.array([[3.0, 4.0]]))[0] == 3.0
    for bad in ("cubic", "const:x"):
        with pytest.raises(ValueError):
            BoundaryData.parse(bad)


def test_monotonicity_examples():
    op = hex_operator(2)
    u = random_smooth_field(op.layout, np.random.default_rng(1)).values
    assert np.abs(op.apply(u) - op.apply(u.copy())).max() <= 1e-12
    assert np.all(op.apply(np.zeros_like(u)) <= op.apply(np.ones_like(u)))
    rep = monotonicity_check(op, trials=5, seed=3)
    assert rep.ok()


def test_field_validation():
    op = hex_operator(2)
    with pytest.raises(ValueError):
        SkeletonField(op.layout, np.ones(3))
    with pytest.raises(ValueError):
        SkeletonField(op.layout, np.full(op.layout.size, np.nan))
