import random

import pytest

from loopsynth.egraph import (
    ConstArg, Op, RangeArg, SaturationConfig, Seq, all_terms, class_expansions, expand, extract_best, saturate,
    term_cost,
)


def seq(*consts, t="T"):
    return Seq(tuple(Op(t, (ConstArg(c),)) for c in consts))


def ranged_ops(sat):
    return {n[1] for nodes in sat.egraph.classes.values() for n in nodes if n[0] == "op" and n[1].is_ranged}


def test_range_invariants():
    with pytest.raises(ValueError):
        RangeArg(0, 5, 2)
    with pytest.raises(ValueError):
        RangeArg(3, 3, 1)
    assert RangeArg(6, 0, -2).count == 4


def test_pair_merge():
    sat = saturate(seq(0, 1))
    assert Op("T", (RangeArg(0, 1, 1),)) in ranged_ops(sat)


def test_variable_step():
    sat = saturate(seq(0, 2, 4))
    assert Op("T", (RangeArg(0, 4, 2),)) in ranged_ops(sat)


def test_step_mismatch_blocks_three_way():
    sat = saturate(seq(0, 5, 6))
    assert all(op.count == 2 for op in ranged_ops(sat))


def test_extract_prefers_range():
    sat = saturate(seq(0, 1, 2, 3))
    best = extract_best(sat)
    assert best == Seq((Op("T", (RangeArg(0, 3, 1),)),))
    assert term_cost(best.children[0]) == 4 < 4 * 2 + 1


def test_single_op_identity():
    t = seq(7)
    assert extract_best(saturate(t)) == t


def test_empty():
    assert extract_best(saturate(Seq(()))) == Seq(())


def test_pinned_ops_never_merge():
    t = Seq(tuple(Op("T", (ConstArg(c),), pinned=True) for c in range(4)))
    assert extract_best(saturate(t)) == t


def test_truncation_flag():
    sat = saturate(seq(*range(40)), SaturationConfig(max_iterations=2))
    assert sat.truncated
    sat = saturate(seq(*range(40)), SaturationConfig(max_enodes=20))
    assert sat.truncated
    assert expand(extract_best(sat)) == expand(seq(*range(40)))


def _random_term(rng):
    ops = []
    for _ in range(rng.randint(1, 7)):
        t = rng.choice("AB")
        ops.append(Op(t, (ConstArg(rng.randrange(6)), ConstArg(rng.choice([0, 0, 1])))))
    return Seq(tuple(ops))


def test_soundness_and_cost_bound():
    rng = random.Random(4)
    for _ in range(200):
        t = _random_term(rng)
        sat = saturate(t, debug=True)
        exp = class_expansions(sat.egraph)
        assert exp[sat.root] == expand(t)
        best = extract_best(sat)
        assert expand(best) == expand(t)
        assert term_cost(best) <= term_cost(t)


def test_extraction_optimal_on_small_graphs():
    rng = random.Random(8)
    checked = 0
    for _ in range(300):
        t = _random_term(rng)
        sat = saturate(t)
        if sat.egraph.class_count > 12:
            continue
        checked += 1
        brute = min(term_cost(x) for x in all_terms(sat))
        assert term_cost(extract_best(sat)) == brute
    assert checked > 50


def test_deterministic():
    t = seq(3, 5, 7, 9, 2, 1)
    assert extract_best(saturate(t)) == extract_best(saturate(t))
