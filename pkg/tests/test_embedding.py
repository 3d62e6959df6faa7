import itertools
from fractions import Fraction

import numpy as np
import pytest

from coarse_trees.covers import greedy_cover, interval_generator
from coarse_trees.embedding import (
    PairSource,
    analytic_h,
    build_embedding,
    certify_pigeonhole,
    check_map,
    nesting_chain,
    pair_data,
    phi,
    product_distance,
    proper_bound,
    psi,
    verify_embedding,
    verify_expansive,
    verify_proper,
)
from coarse_trees.errors import AmbiguousElement, ColorMismatch, NestingViolation, PointNeverCovered
from coarse_trees.fixtures import path, random_graph, singleton
from coarse_trees.forest import build_forest, tree_distance
from coarse_trees.growth import GrowthProfile, LinearControl
from coarse_trees.tower import build_tower

from oracles import bfs_distances, hand_tower

LINEAR = GrowthProfile(LinearControl(2, 0))


def pipeline(space, generator=interval_generator, profile=LINEAR, colors=2):
    tower = build_tower(space, generator, profile, colors)
    forest = build_forest(tower)
    return tower, forest, build_embedding(tower, forest)


@pytest.fixture(scope="module")
def deep():
    return pipeline(path(200), profile=GrowthProfile(LinearControl(0, 0), 2))


@pytest.fixture
def two_color_forest():
    s = path(7)
    tower = hand_tower(
        s,
        [
            [[[0, 1], [2, 3], [6, 7]], [[0], [7]]],
            [[range(4), range(4, 8)], [[0, 1], [6, 7]]],
            [[range(8)], [range(4)]],
            [[], [range(8)]],
        ],
    )
    return tower, build_forest(tower)


def test_psi_level_zero():
    tower, _, _ = pipeline(path(10))
    for x in range(11):
        for j in range(2):
            if any(x in e for e in tower.family(0, j)):
                assert psi(tower, j, x) == 0


def test_psi_is_first_covering_level():
    tower, _, emb = pipeline(path(10))
    for x in range(11):
        for j in range(2):
            first = min(l.k for l in tower.levels if any(x in e for e in l.cover.colors[j]))
            assert psi(tower, j, x) == first == emb.psi[x, j]


def test_psi_on_singleton():
    tower, _, emb = pipeline(singleton())
    assert psi(tower, 0, 0) == 0
    assert psi(tower, 1, 0) == 1
    assert phi(tower, 1, 0).element.is_full


def test_phi_matches_interval_window():
    tower, forest, emb = pipeline(path(10))
    v = phi(tower, 0, 0)
    assert (v.level, v.element.members) == (0, {0, 1, 2, 3})
    assert emb.vertex(0, 0) == v


def test_phi_well_defined():
    tower, _, emb = pipeline(path(10))
    assert emb.image(3) == emb.image(3)
    for x in range(11):
        assert emb.image(x) == tuple(phi(tower, j, x) for j in range(2))


def test_psi_errors():
    s = path(3)
    with pytest.raises(PointNeverCovered):
        psi(hand_tower(s, [[[[0, 1]]]]), 0, 3)
    with pytest.raises(AmbiguousElement):
        phi(hand_tower(s, [[[[0, 1], [1, 2, 3]]]]), 0, 1)


def test_product_distance_examples(two_color_forest):
    tower, forest = two_color_forest
    t0, t1 = forest.trees
    v = {x.label(): x for t in forest.trees for x in t.vertices}
    a = (v["(0,0,0)"], v["(1,0,0)"])
    assert product_distance(forest, a, a) == 0
    assert product_distance(forest, a, (v["(0,1,0)"], v["(1,0,0)"])) == 1
    b = (v["(0,1,1)"], v["(1,0,1)"])
    d0 = bfs_distances(len(t0), t0.edges, t0.vertex_id(a[0]))[t0.vertex_id(b[0])]
    d1 = bfs_distances(len(t1), t1.edges, t1.vertex_id(a[1]))[t1.vertex_id(b[1])]
    assert (d0, d1) == (3, 5)
    assert product_distance(forest, a, b) == 5


def test_product_distance_color_mismatch(two_color_forest):
    _, forest = two_color_forest
    v = forest.trees[0].vertices[0]
    with pytest.raises(ColorMismatch):
        product_distance(forest, (v, v), (v, v))


def test_expansive_on_small_path():
    tower, forest, emb = pipeline(path(9))
    report = verify_expansive(emb, PairSource("exhaustive"))
    assert report.pairs_checked == 45 and report.expansive and report.expansive_margin <= 0


def test_expansive_singleton():
    tower, forest, emb = pipeline(singleton())
    report = verify_embedding(emb, LINEAR, PairSource())
    assert report.pairs_checked == 0 and report.expansive_margin == -4 and report.passed


def test_pair_data_matches_brute_force():
    tower, forest, emb = pipeline(path(30))
    pd = pair_data(emb, PairSource("exhaustive"))
    for x, y, dx, dp in zip(pd.i.tolist(), pd.j.tolist(), pd.d_x.tolist(), pd.d_prod.tolist()):
        assert dx == abs(x - y)
        expect = max(tree_distance(forest.trees[j], emb.vertex(x, j), emb.vertex(y, j)) for j in range(2))
        assert dp == expect == product_distance(forest, emb.image(x), emb.image(y))


def test_h_examples():
    assert analytic_h(LINEAR, 2, 0) == 0
    assert 2 * LINEAR.f(LINEAR.g(0)) == 36
    assert analytic_h(LINEAR, 2, 10) == 0
    assert analytic_h(LINEAR, 2, 36) == 0
    assert analytic_h(LINEAR, 2, 37) == 1


def test_proper_bound():
    assert proper_bound(LINEAR, 2, 0) == proper_bound(LINEAR, 2, 1) == 2 * 9 * 1_620_000
    zero = GrowthProfile(LinearControl(0, 0), 1, 1)
    assert [proper_bound(zero, 1, k) for k in range(1, 4)] == [2 * 9, 2 * 27, 2 * 81]


def test_proper_catches_violations():
    tower, forest, emb = pipeline(path(30))
    tight = GrowthProfile(LinearControl(0, 0), 1, Fraction(1, 1000))
    report = verify_proper(emb, tight, PairSource("exhaustive"))
    assert not report.proper and report.num_proper_violations > 0
    x, y, d, k, bound = report.proper_violations[0]
    assert d > bound


def test_envelopes_are_monotone(deep):
    tower, forest, emb = deep
    report = verify_embedding(emb, tower.profile, PairSource("exhaustive"))
    assert report.passed
    rho = [v for _, v in report.empirical_rho()]
    delta = [v for _, v in report.empirical_delta()]
    assert rho == sorted(rho) and delta == sorted(delta)
    assert report.delta_at(10**9) == float("inf")


def test_sampled_pairs_are_seeded_and_include_extremes():
    s = path(1600)
    a = PairSource("sample", 5000, 7).pairs(s)
    b = PairSource("sample", 5000, 7).pairs(s)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    i, j = a
    assert (i < j).all()
    assert {(0, 1600)} <= set(zip(i.tolist(), j.tolist()))
    assert PairSource().resolve(1500) == "exhaustive" and PairSource().resolve(1501) == "sample"


def test_check_map_flags_corruption():
    tower, forest, emb = pipeline(path(10))
    assert check_map(emb) == []
    emb.phi[0, 0] = emb.phi[10, 0]
    bad = check_map(emb)
    assert bad and bad[0]["point"] == 0


def test_nesting_chain_singleton():
    tower, _, _ = pipeline(singleton(), greedy_cover, colors=1)
    chain = nesting_chain(tower, 0, 0)
    assert len(chain) == 1 and chain[0][2].is_full


def test_nesting_chain_on_deep_tower(deep):
    tower, _, _ = deep
    for x in range(0, 201, 7):
        for j in range(2):
            chain = nesting_chain(tower, x, j)
            assert chain
            for (_, _, a), (_, _, b) in zip(chain, chain[1:]):
                assert a.members <= b.members


def test_nesting_violation():
    s = path(5)
    tower = hand_tower(s, [[[[0, 1], range(2, 6)]], [[[1, 2], [0, 3, 4, 5]]]])
    with pytest.raises(NestingViolation):
        nesting_chain(tower, 1, 0)


def test_pigeonhole(deep):
    tower, _, _ = deep
    ok, witness = certify_pigeonhole(tower)
    assert ok and witness is None


def test_random_graph_pipeline():
    s = random_graph(60, "0.08", 1)
    tower, forest, emb = pipeline(s, greedy_cover, colors=1)
    report = verify_embedding(emb, LINEAR, PairSource("exhaustive"))
    assert report.passed and report.pairs_checked == len(list(itertools.combinations(range(60), 2)))


def test_h_with_shrinking_profile_fails_fast():
    shrinking = GrowthProfile(LinearControl(0, 0), Fraction(1, 1000))
    with pytest.raises(ValueError):
        analytic_h(shrinking, 2, 100)
