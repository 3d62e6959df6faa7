from dataclasses import replace
from fractions import Fraction

import pytest

from coarse_trees.covers import ColoredCover, check_cover, check_lebesgue, greedy_cover, interval_generator
from coarse_trees.errors import DiameterBudgetExceeded, LebesgueWitnessMissing, NonMonotoneControlFunction
from coarse_trees.fixtures import path, random_graph, singleton
from coarse_trees.growth import GrowthProfile, LinearControl, StepControl, eval_f, eval_g, step_profile_from_table
from coarse_trees.io import dumps, tower_to_dict
from coarse_trees.metric import diameter, neighborhood
from coarse_trees.tower import (
    absorb_level,
    build_tower,
    certify_property1,
    certify_property2,
    certify_psi_defined,
    certify_tower,
    nontrivial_depth,
    raw_level_cover,
    renumber_for_basepoint,
    tower_height,
)

from oracles import brute_set_distance

LINEAR = GrowthProfile(LinearControl(2, 0))


def cover(space, colors, scale=1, bound=100):
    return ColoredCover(space, tuple(tuple(space.subset(e) for e in fam) for fam in colors), scale, bound)


@pytest.fixture(scope="module")
def absorbing_tower():
    """Shallow constants so absorption really grows elements."""
    return build_tower(path(200), interval_generator, GrowthProfile(LinearControl(0, 0), 2), 2, keep_traces=True)


# growth ------------------------------------------------------------------------


def test_f_examples():
    assert eval_f(LINEAR, 2) == 18
    assert eval_f(LINEAR, 1800) == 16200
    zero = GrowthProfile(LinearControl(0, 0))
    assert [eval_f(zero, x) for x in (1, Fraction(5, 3), 7)] == [3, 5, 21]


def test_g_examples():
    p = GrowthProfile(LinearControl(2, 0))
    assert [eval_g(p, k) for k in range(3)] == [2, 1800, 1_620_000]


def test_g_by_direct_recurrence():
    p = GrowthProfile(LinearControl(3, 1), growth_constant=Fraction(7, 2), g0=Fraction(1, 3))
    g = Fraction(1, 3)
    for k in range(8):
        assert eval_g(p, k) == g
        g = Fraction(7, 2) * (3 * (3 * g) + 1 + 3 * g)


def test_f_rejects_non_positive():
    with pytest.raises(ValueError):
        eval_f(LINEAR, 0)
    with pytest.raises(ValueError):
        eval_g(LINEAR, -1)


def test_step_control_reads_upward():
    fp = StepControl(((1, 2), (4, 8)), 20)
    assert [fp(r) for r in (Fraction(1, 2), 1, 2, 4, 5)] == [2, 2, 8, 8, 20]


def test_decreasing_control_function_is_caught():
    p = step_profile_from_table([(1, 5), (2, 3)], tail=10)
    p.eval_f_prime(1)
    with pytest.raises(NonMonotoneControlFunction) as e:
        p.eval_f_prime(2)
    assert e.value.witness == (1, 2)


def test_decreasing_control_function_caught_out_of_order():
    p = step_profile_from_table([(1, 5), (2, 3)], tail=10)
    p.eval_f_prime(2)
    with pytest.raises(NonMonotoneControlFunction):
        p.eval_f_prime(1)


# tower pieces --------------------------------------------------------------------


def test_tower_height_examples():
    assert tower_height(singleton(), LINEAR, 1) == 0
    assert tower_height(path(9), LINEAR, 2) == 10
    s = random_graph(20, "0.2", 0)
    assert tower_height(s, LINEAR, 1) == -(-s.diameter // 1)


def test_raw_level_zero_is_generator_output():
    s = path(30)
    raw = raw_level_cover(s, interval_generator, LINEAR, 0, 2)
    gen = interval_generator(s, 2)
    assert raw.colors == gen.colors and raw.scale == 2 and raw.diameter_bound == 18


def test_raw_level_one_on_long_path():
    s = path(2000)
    raw = raw_level_cover(s, interval_generator, LINEAR, 1, 2)
    assert max(diameter(e) for _, _, e in raw.elements()) <= 2 * 1802 + 2
    assert check_cover(raw).passed
    assert check_lebesgue(raw, 1).passed


def test_raw_level_singleton():
    raw = raw_level_cover(singleton(), interval_generator, LINEAR, 3, 2)
    assert [len(f) for f in raw.colors] == [1, 0]
    assert check_cover(raw).passed


def test_raw_level_budget_exceeded():
    with pytest.raises(DiameterBudgetExceeded) as e:
        raw_level_cover(path(20), greedy_cover, GrowthProfile(LinearControl(0, 0)), 0, 1)
    assert e.value.witness["diameter"] == 20


def test_renumber_identity():
    s = path(9)
    c = cover(s, [[range(5)], [range(5, 10)]])
    out, perm = renumber_for_basepoint(c, 0, 0, 2)
    assert perm == (0, 1) and out is c


def test_renumber_level_zero_moves_basepoint_color():
    s = path(9)
    c = cover(s, [[range(5, 10)], [range(5)]])
    out, perm = renumber_for_basepoint(c, 0, 0, 2)
    assert perm == (1, 0) and 0 in out.colors[0][0]


def test_renumber_lowest_index_rule():
    s = path(9)
    c = cover(s, [[range(4), [8, 9]], [[5, 6]], [[0, 1, 2]]])
    out, perm = renumber_for_basepoint(c, 1, 0, 3)
    assert perm == (1, 0, 2)
    assert out.colors[1] == c.colors[0] and out.colors[0] == c.colors[1]


def test_renumber_without_witness():
    s = path(9)
    with pytest.raises(LebesgueWitnessMissing):
        renumber_for_basepoint(cover(s, [[range(2), range(2, 10)]]), 2, 1, 1)


def test_absorb_level_zero_is_identity():
    s = path(20)
    raw = raw_level_cover(s, interval_generator, LINEAR, 0, 2)
    out, traces = absorb_level(raw, [], LINEAR)
    assert out.colors == raw.colors
    assert all(t.result == t.seed and not t.steps for t in traces)


def test_absorb_with_far_lower_elements():
    s = path(60)
    profile = GrowthProfile(LinearControl(0, 0), 10, 1)  # f(g(0)) = 3
    lower = cover(s, [[[0], [59]], []])
    raw = cover(s, [[range(20, 40)], [[*range(20), *range(40, 61)]]], 1, 100)
    out, traces = absorb_level(raw, [lower], profile)
    assert out.colors[0] == raw.colors[0]
    assert traces[0].steps[0].absorbed == ()


def test_absorb_near_element_is_swallowed():
    s = path(2000)
    g1 = LINEAR.g(1)
    v = s.subset(range(100, 104))
    lower = cover(s, [[v], []])
    u = s.subset(range(110, 110 + 1000))  # gap 7 < f(g(0)) = 18
    rest = s.subset([p for p in range(2001) if p not in u.members and p not in v.members])
    raw = ColoredCover(s, ((u,), (rest,)), g1, LINEAR.f(g1))
    out, traces = absorb_level(raw, [lower], LINEAR)
    assert v.issubset(out.colors[0][0])
    assert traces[0].steps[0].absorbed == (0,)


# full towers ---------------------------------------------------------------------


def test_singleton_tower():
    t = build_tower(singleton(), greedy_cover, LINEAR, 1)
    assert t.height == 0 and len(t.levels) == 1
    assert t.levels[0].cover.colors[0][0].is_full
    assert all(c.passed for c in certify_tower(t))


def test_path_tower_upper_levels_are_whole_space():
    t = build_tower(path(9), interval_generator, LINEAR, 2)
    assert t.height == 10
    assert t.levels[0].scale == 2
    for lvl in t.levels[1:]:
        for fam in lvl.cover.colors:
            assert all(e.is_full for e in fam)
    assert all(c.passed for c in certify_tower(t))


def test_single_color_greedy_tower():
    s = random_graph(30, "0.1", 2)
    t = build_tower(s, greedy_cover, GrowthProfile(LinearControl(2, 0)), 1)
    cert = certify_property2(t)
    assert cert.passed and cert.checked == len(t.levels)
    assert all(c.passed for c in certify_tower(t))


def test_build_is_deterministic():
    a = build_tower(path(50), interval_generator, LINEAR, 2)
    b = build_tower(path(50), interval_generator, LINEAR, 2)
    assert dumps("tower", tower_to_dict(a)) == dumps("tower", tower_to_dict(b))


def test_property1_vacuous_for_height_zero():
    t = build_tower(singleton(), greedy_cover, LINEAR, 1)
    assert certify_property1(t).passed and certify_property1(t).checked == 0


def test_absorbing_tower_certificates(absorbing_tower):
    assert nontrivial_depth(absorbing_tower) >= 2
    assert all(c.passed for c in certify_tower(absorbing_tower))


def test_traces_follow_induction(absorbing_tower):
    t = absorbing_tower
    p = t.profile
    depth = nontrivial_depth(t)
    for k, traces in t.traces.items():
        if k > depth + 1:
            break
        for tr in traces:
            w = tr.seed
            for step in tr.steps:
                assert step.w_above == w
                lower = t.levels[step.i].cover.colors[tr.color]
                expect = [a for a, v in enumerate(lower) if brute_set_distance(t.space, v, w.members) < p.f(p.g(step.i))]
                if not w.is_full:
                    assert list(step.absorbed) == expect
                grown = w
                for a in step.absorbed:
                    grown = grown | neighborhood(lower[a], step.i)
                assert step.w == grown and w.issubset(step.w)
                assert diameter(step.w) <= diameter(w) + 8 * p.f(p.g(step.i))
                w = step.w
            assert w == t.levels[k].cover.colors[tr.color][tr.element_index]
            assert diameter(w) <= diameter(tr.seed) + sum(8 * p.f(p.g(i)) for i in range(k))


def test_property1_catches_unabsorbed_element(absorbing_tower):
    t = absorbing_tower
    k, tr = next((k, tr) for k, trs in sorted(t.traces.items()) for tr in trs if tr.result != tr.seed)
    lvl = t.levels[k]
    fam = list(lvl.cover.colors[tr.color])
    fam[tr.element_index] = tr.seed
    colors = list(lvl.cover.colors)
    colors[tr.color] = tuple(fam)
    bad_level = replace(lvl, cover=lvl.cover.with_colors(tuple(colors)))
    bad = replace(t, levels=t.levels[:k] + [bad_level] + t.levels[k + 1 :])
    cert = certify_property1(bad)
    assert not cert.passed
    w = cert.witness
    assert w["k"] == k and w["color"] == tr.color
    assert w["point_of_V^l_outside_U"] not in tr.seed


def test_property2_replays_renumbering(absorbing_tower):
    t = absorbing_tower
    for lvl in t.levels:
        ball = neighborhood(t.space.point(t.basepoint), lvl.k)
        fam = lvl.cover.colors[lvl.k % t.num_colors]
        assert any(ball.issubset(e) for e in fam)
        if lvl.k >= t.space.diameter:
            assert any(e.is_full for e in fam)


def test_psi_defined(absorbing_tower):
    assert certify_psi_defined(absorbing_tower).passed
