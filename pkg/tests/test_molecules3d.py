import numpy as np
import pytest

from schwarzdisks.errors import Disconnected, ParseError, UnknownElement
from schwarzdisks.layers import Ball
from schwarzdisks.molecules3d import (
    Atom,
    RadiiConvention,
    build_balls,
    icosahedral_cluster,
    molecule_stats,
    parse_balls3d,
    parse_molecule,
    uff_radii,
)

TABLE = {"O": 1.75, "H": 1.0}


def test_parse_examples():
    (a,) = parse_molecule("H 0 0 0")
    assert a.element == "H" and a.radius_override is None
    (b,) = parse_molecule("X 0 0 0 1.5")
    assert b.radius_override == 1.5
    with pytest.raises(ParseError) as exc:
        parse_molecule("H 0 0 0\nH 0 0")
    assert exc.value.line == 2


def test_parse_xyz_header_and_count():
    atoms = parse_molecule("2\nwater fragment\nO 0 0 0\nH 0.96 0 0\n")
    assert [a.element for a in atoms] == ["O", "H"]
    with pytest.raises(ParseError):
        parse_molecule("3\ncomment\nO 0 0 0\n")
    with pytest.raises(UnknownElement):
        parse_molecule("Zz 0 0 0")
    with pytest.raises(ParseError) as exc:
        parse_molecule("title line\nO 0 0 0\nO 1 x 0\n")
    assert exc.value.line == 3


def test_radii_conventions():
    o = Atom("O", (0, 0, 0))
    assert RadiiConvention(base_table=TABLE).radius(o) == pytest.approx(1.925)
    assert RadiiConvention("sas", probe=1.4, base_table=TABLE).radius(o) == pytest.approx(3.15)
    assert RadiiConvention(base_table=TABLE).radius(Atom("X", (0, 0, 0), 2.0)) == pytest.approx(2.2)
    with pytest.raises(ValueError):
        RadiiConvention(scale=0.0)
    with pytest.raises(ValueError):
        RadiiConvention("cosmo")


def test_uff_table_covers_organic_elements():
    t = uff_radii()
    for el in ("H", "C", "N", "O", "S"):
        assert 1.0 < t[el] < 2.5


def test_two_ball_stats():
    s = molecule_stats([Ball(1, (0, 0, 0), 1.0), Ball(2, (1.5, 0, 0), 1.0)])
    assert s.avg_neighbors == 1.0
    assert s.avg_overlap == pytest.approx(0.5)
    assert s.avg_max_intersection_degree == 2.0
    assert s.n_layers == 1


def test_core_shell_stats():
    s = molecule_stats(icosahedral_cluster())
    assert s.n_layers == 2 and s.n_atoms == 13
    assert s.avg_overlap > 0


def test_disconnected():
    with pytest.raises(Disconnected):
        molecule_stats([Ball(1, (0, 0, 0), 1.0), Ball(2, (5, 0, 0), 1.0)])


def random_molecule(n, rng):
    pos = [np.zeros(3)]
    for _ in range(n - 1):
        v = rng.normal(size=3)
        pos.append(pos[rng.integers(len(pos))] + 1.4 * v / np.linalg.norm(v))
    return [Atom(rng.choice(["C", "N", "O", "H"]), tuple(p)) for p in pos]


def test_rigid_motion_invariance():
    rng = np.random.default_rng(3)
    atoms = random_molecule(25, rng)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    shift = rng.normal(size=3) * 10
    moved = [Atom(a.element, tuple(q @ np.array(a.position) + shift)) for a in atoms]
    conv = RadiiConvention()
    s1 = molecule_stats(build_balls(atoms, conv))
    s2 = molecule_stats(build_balls(moved, conv))
    assert s1.n_layers == s2.n_layers
    assert s1.avg_neighbors == s2.avg_neighbors
    assert s1.avg_overlap == pytest.approx(s2.avg_overlap, abs=1e-9)


def test_sas_neighbors_superset():
    from schwarzdisks.layers import ball_neighbors

    rng = np.random.default_rng(4)
    atoms = random_molecule(30, rng)
    sets = []
    for conv in (RadiiConvention(), RadiiConvention("sas")):
        balls = build_balls(atoms, conv)
        c = np.array([b.center for b in balls])
        r = np.array([b.radius for b in balls])
        sets.append([set(nb) for nb in ball_neighbors(c, r)])
    assert all(a <= b for a, b in zip(*sets))


def test_parse_balls3d():
    balls = parse_balls3d("# balls3d v1\n2 1 0 0 1\n1 0 0 0 1\n")
    assert [b.id for b in balls] == [1, 2]
    with pytest.raises(ParseError):
        parse_balls3d("1 0 0 0 1\n")
    with pytest.raises(ParseError):
        parse_balls3d("# balls3d v1\n1 0 0 0 1\n3 1 0 0 1\n")
