"""Fat Cantor stages, hole addressing, chains, and component search."""

import random
from fractions import Fraction as F

import pytest

from nowhere_lq.cantor import (
    CBuiltApprox,
    ComponentChain,
    StageImage,
    WitnessNotFound,
    a_set,
    chain_index,
    chains_almost_disjoint,
    chains_count,
    enumerate_chains,
    find_component_in,
    first_chains,
    hole_interval,
    left_tail_limit,
    left_tail_measure,
    levels_almost_disjoint,
    stage,
    stage_interval,
    stage_length,
    t_right,
    tn_bounds,
    witness_chain,
)
from nowhere_lq.exact import DomainError
from nowhere_lq.intervals import UNIT, QInterval, QIntervalSet


def iv(a, b):
    return QInterval(F(a), F(b))


def naive_stages(depth):
    """Oracle: apply the removal rule literally with plain Fractions."""
    levels = [[(F(0), F(1))]]
    for k in range(1, depth):
        nxt = []
        for a, b in levels[-1]:
            half_hole = F(1, 4**k) / 2
            mid = (a + b) / 2
            nxt += [(a, mid - half_hole), (mid + half_hole, b)]
        levels.append(nxt)
    return levels


def test_stage_examples_frozen():
    assert stage(2).intervals.intervals == (iv(0, "3/8"), iv("5/8", 1))
    assert stage(3).intervals.intervals == (
        iv(0, "5/32"),
        iv("7/32", "3/8"),
        iv("5/8", "25/32"),
        iv("27/32", 1),
    )
    assert stage(1).intervals.intervals == (iv(0, 1),)


def test_stages_match_naive_rule():
    oracle = naive_stages(12)
    for n in range(1, 13):
        got = stage(n).intervals.intervals
        assert [(ivl.lo, ivl.hi) for ivl in got] == oracle[n - 1]


def test_stage_measure_closed_form():
    for n in range(1, 31):
        assert stage(n).measure == F(1, 2) + F(1, 2**n)
    for n in range(1, 13):
        assert stage(n).intervals.measure == stage(n).measure


def test_stage_interval_index_and_errors():
    assert stage_interval(2, 1) == iv("5/8", 1)
    assert stage_interval(3, 2) == iv("5/8", "25/32")
    with pytest.raises(DomainError):
        stage_interval(3, 4)
    with pytest.raises(DomainError):
        stage(0)
    with pytest.raises(DomainError):
        stage(40).intervals  # materialization cap


def test_t_right_recurrence_and_closed_form():
    assert t_right(1) == 1
    assert t_right(2) == F(3, 8)
    assert t_right(3) == F(5, 32)
    tn = F(1)
    for n in range(1, 61):
        assert t_right(n) == tn
        # closed form (1 + 2^(n-1)) / 2^(2n-1)
        assert tn == F(1 + 2 ** (n - 1), 2 ** (2 * n - 1))
        tn = (tn - F(1, 4**n)) / 2


def test_tn_bounds_report():
    r3 = tn_bounds(3)
    assert r3["t_n"] == F(5, 32) and r3["fast_bound"] == F(4, 32)
    assert not r3["fast_bound_holds"] and r3["safe_bound_holds"]
    for n in range(1, 61):
        r = tn_bounds(n)
        assert r["safe_bound_holds"]
        assert r["fast_bound_holds"] == (n <= 2)
        assert r["t_n"] <= F(2, 2**n)


def test_holes_frozen_examples():
    assert hole_interval(1, 0) == iv("3/8", "5/8")
    assert hole_interval(2, 0) == iv("5/32", "7/32")
    assert hole_interval(2, 1) == iv("25/32", "27/32")
    assert stage(2).new_holes == [iv("5/32", "7/32"), iv("25/32", "27/32")]


def test_holes_have_disjoint_closures():
    holes = [hole_interval(k, i) for k in range(1, 6) for i in range(1 << (k - 1))]
    for a in range(len(holes)):
        for b in range(a + 1, len(holes)):
            assert holes[a].hi < holes[b].lo or holes[b].hi < holes[a].lo


def test_left_tail_measure_examples_and_closed_form():
    assert left_tail_measure(1, 1) == 1
    assert left_tail_measure(2, 3) == F(5, 16)
    assert left_tail_measure(2, 20) == F(1, 4) + F(1, 2**21)
    for n in range(1, 11):
        prev = None
        for m in range(n, 31):
            val = left_tail_measure(n, m)
            assert val == F(1, 2**n) + F(2, 2 ** (n + m))
            if prev is not None:
                assert val < prev
            prev = val
        assert left_tail_limit(n) == F(1, 2**n)
        assert prev > left_tail_limit(n)
    with pytest.raises(DomainError):
        left_tail_measure(3, 2)


def test_left_tail_measure_matches_materialized():
    for n in range(1, 5):
        for m in range(n, 9):
            window = QIntervalSet.single(0, t_right(n))
            direct = stage(m).intervals.intersect(window).measure
            assert left_tail_measure(n, m) == direct


def test_stage_image_contains_oracle():
    rng = random.Random(17)
    img = StageImage(6, iv("1/4", "3/8"))
    materialized = img.interval_set()
    assert materialized.measure == img.measure
    for _ in range(300):
        x = F(rng.randrange(0, 3 * 2**12), 2**13)  # spans beyond the hull too
        assert img.contains(x) == materialized.contains_point(x)


def test_stage_image_measure_within_oracle():
    rng = random.Random(23)
    img = StageImage(7, iv("1/8", "5/8"))
    materialized = img.interval_set()
    for _ in range(120):
        a = F(rng.randrange(0, 2**10), 2**10)
        b = F(rng.randrange(0, 2**10), 2**10)
        if a > b:
            a, b = b, a
        window = QInterval(a, b)
        direct = materialized.intersect_interval(window).measure
        assert img.measure_within(window) == direct


def test_chain_hulls():
    assert ComponentChain(()).hull() == iv(0, 1)
    assert ComponentChain(((1, 0),)).hull() == iv("3/8", "5/8")
    assert ComponentChain(((2, 1),)).hull() == iv("25/32", "27/32")
    nested = ComponentChain(((1, 0), (1, 0)))
    # central hole of the copy living on [3/8, 5/8]
    assert nested.hull() == iv("15/32", "17/32")
    assert nested.extended(1).holes == ((1, 0), (1, 0), (1, 0))
    with pytest.raises(DomainError):
        ComponentChain(((2, 2),))


def test_canonical_enumeration_level2():
    chains = first_chains(2, 7)
    assert [c.holes for c in chains] == [
        ((1, 0),),
        ((2, 0),),
        ((2, 1),),
        ((3, 0),),
        ((3, 1),),
        ((3, 2),),
        ((3, 3),),
    ]
    for pos, chain in enumerate(chains, start=1):
        assert chain_index(chain) == pos
        k, i = chain.holes[0]
        assert pos == 2 ** (k - 1) + i


def test_chain_index_matches_enumeration_order():
    for level in (2, 3, 4, 5):
        for pos, chain in enumerate(first_chains(level, 150), start=1):
            assert chain_index(chain) == pos


def test_chains_count_matches_enumeration():
    import itertools

    for length in (1, 2, 3):
        seen: dict[int, int] = {}
        for chain in itertools.islice(enumerate_chains(length + 1), 500):
            seen[chain.total_generation] = seen.get(chain.total_generation, 0) + 1
        complete = [t for t in sorted(seen) if t < max(seen)]
        for t in complete:
            assert seen[t] == chains_count(length, t)


def test_a_set_frozen_examples():
    one = a_set(2, 1, 2)
    assert len(one.components) == 1
    assert one.components[0][1] == iv("3/8", "5/8")
    assert one.measure == F(3, 16)
    assert one.realization.measure == F(3, 16)

    three = a_set(2, 2, 4)
    hulls = [hull for _, hull in three.components]
    assert hulls == [iv("3/8", "5/8"), iv("5/32", "7/32"), iv("25/32", "27/32")]


def test_a_set_counts_and_measure_bounds():
    for n in (1, 2, 3):
        for D in (1, 2, 3):
            approx = a_set(n, D, 5)
            assert len(approx.components) == ((1 << D) - 1) ** (n - 1)
            lo, hi = approx.measure_bounds
            assert lo <= approx.measure <= hi
            assert approx.omitted_tail >= 0
    with pytest.raises(DomainError):
        a_set(6, 8, 8)  # 255^5 components: the guard must refuse


def test_a_set_level2_measure_within_tolerance():
    for D in range(1, 9):
        for m in range(1, 9):
            approx = a_set(2, D, m)
            assert abs(approx.measure - F(1, 4)) <= F(1, 2**D) + F(1, 2**m)


def test_chains_almost_disjoint_against_materialized():
    # all pairs from levels 2 and 3 at small depth, exact set intersection
    chains2 = first_chains(2, 3)
    chains3 = first_chains(3, 5)
    m = 4
    sets = {
        chain.holes: StageImage(m, chain.hull()).interval_set()
        for chain in chains2 + chains3
    }
    for group_a in (chains2, chains3):
        for group_b in (chains2, chains3):
            for ca in group_a:
                for cb in group_b:
                    if ca.holes == cb.holes:
                        continue
                    overlap = sets[ca.holes].intersect(sets[cb.holes]).measure
                    predicted = chains_almost_disjoint(ca, m, cb, m)
                    assert predicted == (overlap == 0), (ca, cb)


def test_chains_prefix_overlap_gated_by_stage():
    shallow = ComponentChain(((1, 0),))
    deep = ComponentChain(((1, 0), (3, 1)))
    # generation-3 extension hole: cleared only once the stage passes it
    assert chains_almost_disjoint(shallow, 4, deep, 4)
    assert not chains_almost_disjoint(shallow, 3, deep, 3)
    img = StageImage(3, shallow.hull())
    overlap = img.measure_within(deep.hull())
    assert overlap == deep.hull().length  # hole still fully inside stage 3


def test_levels_almost_disjoint_decision():
    assert levels_almost_disjoint(2, 3, D=7, m=8)
    assert not levels_almost_disjoint(2, 3, D=8, m=8)
    with pytest.raises(DomainError):
        levels_almost_disjoint(3, 3, 2, 4)
    # materialized cross-check at small depth
    low = a_set(2, 2, 3)
    high = a_set(3, 2, 3)
    assert low.realization.intersect(high.realization).measure == 0
    low_bad = a_set(2, 3, 3)
    high_bad = a_set(3, 3, 3)
    assert low_bad.realization.intersect(high_bad.realization).measure > 0


def test_find_component_trivial_and_hole():
    chain, hull = find_component_in(iv(0, 1), 1)
    assert chain.holes == () and hull == iv(0, 1)
    chain, hull = find_component_in(iv("3/8", "5/8"), 2)
    assert chain.holes == ((1, 0),) and hull == iv("3/8", "5/8")


def test_find_component_third_to_half():
    target = iv("1/3", "1/2")
    for level in range(2, 9):
        chain, hull = find_component_in(target, level)
        assert chain.level == level
        assert target.lo <= hull.lo and hull.hi <= target.hi
        assert hull == chain.hull()
    chain2, hull2 = find_component_in(target, 2)
    assert chain2.holes == ((4, 3),)
    assert hull2 == iv("173/512", "175/512")


def test_find_component_deterministic():
    target = iv("1/3", "1/2")
    a = find_component_in(target, 5)
    b = find_component_in(target, 5)
    assert a == b


def test_find_component_budget_error():
    tiny = iv("1/3", F(1, 3) + F(1, 10**9))
    with pytest.raises(WitnessNotFound):
        find_component_in(tiny, 2, gen_budget=3, max_expansions=50)


def test_witness_chain_examples():
    n0, comps = witness_chain(iv(0, 1), K=3)
    assert n0 == 1 and comps[1][1] == iv(0, 1)
    n0, comps = witness_chain(iv("3/8", "5/8"), K=3)
    assert n0 == 2
    n0, comps = witness_chain(iv("1/3", "1/2"), K=5)
    assert n0 == 2
    assert set(comps) == set(range(2, 8))
    for n, (chain, hull) in comps.items():
        assert chain.level == n
        assert F(1, 3) <= hull.lo and hull.hi <= F(1, 2)


def test_witness_extension_nests():
    chain = ComponentChain(((4, 3),))
    inner = chain.extended(2)
    assert chain.hull().contains_interval(inner.hull())
