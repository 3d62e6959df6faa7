from fractions import Fraction

import numpy as np
import pytest

from coarse_trees.errors import (
    AsymmetryError,
    DisconnectedGraph,
    EmptySubset,
    NegativeDistance,
    SpaceMismatch,
    TriangleViolation,
    ZeroOffDiagonal,
)
from coarse_trees.fixtures import grid, path, random_graph
from coarse_trees.metric import (
    as_rational,
    diameter,
    format_rational,
    neighborhood,
    product_space,
    set_distance,
    space_from_graph,
    validate_space,
)

from oracles import apsp_by_enumeration, brute_diameter, brute_neighborhood, brute_set_distance


def test_two_point_table_is_valid():
    s = validate_space([[0, 1], [1, 0]])
    assert s.n == 2 and s.dist(0, 1) == 1


def test_singleton_table_is_valid():
    s = validate_space([[0]])
    assert s.n == 1 and s.diameter == 0


def test_triangle_violation_reports_smallest_triple():
    with pytest.raises(TriangleViolation) as e:
        validate_space([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    assert e.value.witness == (0, 2, 1)


@pytest.mark.parametrize(
    "table, err",
    [
        ([[0, -1], [-1, 0]], NegativeDistance),
        ([[0, 1], [2, 0]], AsymmetryError),
        ([[1, 1], [1, 0]], ZeroOffDiagonal),
        ([[0, 0], [0, 0]], ZeroOffDiagonal),
    ],
)
def test_axiom_failures(table, err):
    with pytest.raises(err):
        validate_space(table)


def test_rational_entries_stay_exact():
    s = validate_space([[0, "1/3", "1/2"], ["1/3", 0, "1/4"], ["1/2", "1/4", 0]])
    assert s.dist(0, 1) == Fraction(1, 3)
    assert s.denominator == 12
    assert s.diameter == Fraction(1, 2)


def test_rational_parsing_helpers():
    assert as_rational("6/4") == Fraction(3, 2)
    assert as_rational("2") == 2 and isinstance(as_rational("2"), int)
    assert as_rational(0.1) == Fraction(1, 10)
    assert format_rational(Fraction(3, 2)) == "3/2"
    assert format_rational(4) == "4"


def test_path_graph_distances():
    s = space_from_graph([(0, 1, 1), (1, 2, 1), (2, 3, 1)], 4)
    assert s.dist(0, 3) == 3


def test_shortcut_beats_heavy_edge():
    s = space_from_graph([(0, 1, 1), (1, 2, 1), (0, 2, 5)], 3)
    assert s.dist(0, 2) == 2


def test_single_vertex_graph():
    s = space_from_graph([], 1)
    assert s.n == 1 and s.diameter == 0


def test_disconnected_graph_has_witness():
    with pytest.raises(DisconnectedGraph) as e:
        space_from_graph([(0, 1, 1), (2, 3, 1)], 4)
    p, q = e.value.witness
    assert {p, q} & {0, 1} and {p, q} & {2, 3}


def test_parallel_edges_keep_lightest():
    s = space_from_graph([(0, 1, 3), (0, 1, "1/2")], 2)
    assert s.dist(0, 1) == Fraction(1, 2)


@pytest.mark.parametrize("seed", range(5))
def test_graph_metric_matches_path_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 6
    edges = [(i, i + 1, int(rng.integers(1, 6))) for i in range(n - 1)]
    edges += [(int(a), int(b), f"{int(rng.integers(1, 9))}/2") for a, b in rng.integers(0, n, size=(4, 2)) if a != b]
    s = space_from_graph(edges, n)
    oracle = apsp_by_enumeration(edges, n)
    for p in range(n):
        for q in range(n):
            assert Fraction(s.dist(p, q)) == oracle[p][q]


def test_random_graph_is_connected_and_seeded():
    a = random_graph(40, "0.05", 3)
    b = random_graph(40, "0.05", 3)
    assert np.array_equal(a.scaled, b.scaled)
    validate_space(a.distance_table())


def test_set_distance_examples():
    s = path(9)
    assert set_distance(s.subset([1, 2]), s.subset([2, 7])) == 0
    assert set_distance(s.point(3), s.point(8)) == 5
    assert set_distance(s.subset([0, 1]), s.subset([5, 9])) == 4


def test_set_distance_matches_brute_force():
    s = random_graph(30, "0.1", 7)
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = set(rng.choice(30, size=int(rng.integers(1, 6)), replace=False).tolist())
        b = set(rng.choice(30, size=int(rng.integers(1, 6)), replace=False).tolist())
        assert set_distance(s.subset(a), s.subset(b)) == brute_set_distance(s, a, b)


def test_neighborhood_examples():
    s = path(9)
    v = s.subset([4, 6])
    assert neighborhood(v, 0) == v
    assert neighborhood(s.point(5), 2).members == {3, 4, 5, 6, 7}
    assert neighborhood(s.point(2), 9).is_full
    assert neighborhood(s.point(0), Fraction(3, 2)).members == {0, 1}


def test_neighborhood_matches_brute_force():
    s = random_graph(25, "0.15", 2)
    rng = np.random.default_rng(1)
    for _ in range(40):
        v = set(rng.choice(25, size=int(rng.integers(1, 4)), replace=False).tolist())
        r = Fraction(int(rng.integers(0, 30)), int(rng.integers(1, 4)))
        assert neighborhood(s.subset(v), r).members == brute_neighborhood(s, v, r)


def test_diameter_examples():
    s = path(9)
    assert diameter(s.point(4)) == 0
    assert diameter(s.full()) == 9
    assert diameter(s.subset([2, 7])) == 5
    assert brute_diameter(s, range(10)) == 9


def test_empty_and_foreign_subsets_rejected():
    s, t = path(3), path(3)
    with pytest.raises(EmptySubset):
        diameter(s.subset([]))
    with pytest.raises(SpaceMismatch):
        set_distance(s.point(0), t.point(1))


def test_subset_algebra():
    s = path(20)
    a, b = s.subset([1, 2, 3]), s.subset(range(10))
    assert a <= b and a.issubset(b) and not b.issubset(a)
    assert (a | s.point(15)).members == {1, 2, 3, 15}
    assert a.intersects(b) and not a.intersects(s.point(15))
    assert s.subset([3, 2, 1]) is a  # interned
    assert len(a) == 3 and list(a) == [1, 2, 3]


def test_sup_product_distances():
    p = product_space(path(2), path(3), "sup")
    assert p.n == 12
    assert p.labels[1 * 4 + 2] == "1,2"
    assert p.dist(0, 2 * 4 + 3) == 3
    l1 = product_space(path(2), path(3), "l1")
    assert l1.dist(0, 2 * 4 + 3) == 5


def test_grid_fixture():
    g = grid(3, 2)
    assert g.n == 16 and g.diameter == 3
    assert g.coord_array.shape == (16, 2)
