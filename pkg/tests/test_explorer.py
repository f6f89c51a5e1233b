import pytest

from loopsynth.emit import emit_c
from loopsynth.explorer.analysis import analyze_loops
from loopsynth.explorer.space import (
    DesignSpace, ExplorerConfig, Variant, enumerate_pragmas, enumerate_variants, synthesize_design_space,
)
from loopsynth.explorer.transforms import (
    BranchEliminate, Fuse, IllegalTransform, Interchange, Outline, Pad, Perfectize, StrengthReduce, Tile,
    apply_transform, outline_groups, staticize_bounds,
)
from loopsynth.interp import check_equiv
from loopsynth.ir import IRError, loops
from loopsynth.parse import parse_program
from loopsynth.pragmas import EMPTY
from loopsynth.validate import side_channel_violations


def k(body, params="const u64 a[16], const u64 b[16], const u64 c[1], u64 t[16], u64 o[16]"):
    return parse_program(f"void k({params}) {{ {body} }}")


def test_no_carried_dependence():
    f = analyze_loops(k("L: for (int v = 0; v < 8; v++) { t[v] = a[v] * c[0]; }"))["L"]
    assert not f.carried and f.trip_count == 8 and f.depth == 0
    assert dict(f.strides)["t"] == (1,)


def test_distance_one():
    f = analyze_loops(k("L: for (int v = 1; v < 8; v++) { t[v] = t[v - 1] + a[v]; }"))["L"]
    assert f.carried and f.distance == 1 and "t" in f.carried_arrays


def test_distance_two():
    f = analyze_loops(k("L: for (int v = 2; v < 10; v++) { t[v] = t[v - 2] + a[v]; }"))["L"]
    assert f.distance == 2


def test_nonaffine_is_conservative():
    f = analyze_loops(k("L: for (int v = 0; v < 8; v++) { t[v & 5] = a[v]; }"))["L"]
    assert f.carried and f.distance == 1


def test_nesting_facts():
    info = analyze_loops(k("A: for (int i = 0; i < 4; i++) { t[i] = a[i]; "
                           "B: for (int j = 0; j < 4; j++) { o[4 * i + j] = a[j]; } }"))
    assert info["B"].depth == 1 and info["B"].parent == "A"
    assert not info["A"].perfect and info["B"].perfect


BOUNDED = """void v(const u64 a[8], u64 t[8], int n <= 8) {
    L: for (int i = 0; i < n; i++) { t[i] = a[i] * 3; }
}"""


def test_staticize_identity_on_constant_bounds():
    p = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v]; }")
    assert staticize_bounds(p) == p


def test_staticize_per_bound_value():
    p = parse_program(BOUNDED)
    q = staticize_bounds(p)
    (lp,) = loops(q.body)
    assert lp.stop == 8
    assert not any("variable loop bound" in x for x in side_channel_violations(q))
    assert not any("branch" in x for x in side_channel_violations(q))
    for n in range(9):
        assert check_equiv(p, q, 200, 0, {"n": n}).equivalent


def test_bound_needs_maximum():
    with pytest.raises(IRError):
        parse_program(BOUNDED.replace("int n <= 8", "int n"))


def test_fuse_independent():
    p = k("A: for (int i = 0; i < 8; i++) { t[i] = a[i] + 1; } B: for (int i = 0; i < 8; i++) { o[i] = b[i] * 3; }")
    q = apply_transform(p, Fuse("A", "B"))
    assert len(list(loops(q.body))) == 1
    assert check_equiv(p, q).equivalent


def test_pad_then_fuse():
    p = k("A: for (int i = 0; i < 7; i++) { t[i] = a[i] + 1; } B: for (int i = 0; i < 8; i++) { o[i] = b[i] * 3; }")
    with pytest.raises(IllegalTransform):
        apply_transform(p, Fuse("A", "B"))
    q = apply_transform(p, Pad("A", 8))
    r = apply_transform(q, Fuse("A", "B"))
    (lp,) = loops(r.body)
    assert lp.trip_count() == 8
    assert check_equiv(p, r).equivalent


def test_fusion_preventing_dependence():
    p = k("A: for (int i = 0; i < 8; i++) { t[i] = a[i] + 1; } B: for (int i = 0; i < 8; i++) { o[i] = t[7 - i]; }")
    with pytest.raises(IllegalTransform):
        apply_transform(p, Fuse("A", "B"))


def test_interchange_gates():
    imperfect = k("A: for (int i = 0; i < 4; i++) { t[i] = a[i]; B: for (int j = 0; j < 4; j++) { o[4 * i + j] = a[j]; } }")
    with pytest.raises(IllegalTransform):
        apply_transform(imperfect, Interchange("A", "B"))
    perfect = k("A: for (int i = 0; i < 4; i++) { B: for (int j = 0; j < 4; j++) { o[4 * i + j] = a[i] ^ b[j]; } }")
    q = apply_transform(perfect, Interchange("A", "B"))
    assert check_equiv(perfect, q).equivalent
    reversal = k("A: for (int i = 1; i < 4; i++) { B: for (int j = 0; j < 3; j++) "
                 "{ t[4 * i + j] = t[4 * i + j - 3] + a[j]; } }")
    with pytest.raises(IllegalTransform):
        apply_transform(reversal, Interchange("A", "B"))


def test_perfectize_then_interchange():
    p = k("A: for (int i = 0; i < 4; i++) { o[4 * i] = a[4 * i]; "
          "B: for (int j = 1; j < 4; j++) { o[4 * i + j] = o[4 * i + j - 1] + a[4 * i + j]; } }")
    q = apply_transform(p, Perfectize("A"))
    assert analyze_loops(q)["A"].perfect
    assert check_equiv(p, q).equivalent


def test_branch_elimination():
    p = k("L: for (int i = 0; i < 8; i++) { if (a[i]) { t[i] = a[i] + b[i]; } }")
    q = apply_transform(p, BranchEliminate())
    assert side_channel_violations(q) == []
    assert check_equiv(p, q).equivalent


def test_strength_reduction():
    p = k("L: for (int i = 0; i < 8; i++) { t[i % 4] = a[i] * 8; }")
    q = apply_transform(p, StrengthReduce())
    text = emit_c(q)
    assert "<< 3" in text and "& 3" in text and "*" not in text.split("{", 1)[1]
    assert check_equiv(p, q).equivalent


def test_tile_divides():
    p = k("L: for (int i = 0; i < 8; i++) { t[i] = a[i] + 1; }")
    q = apply_transform(p, Tile("L", 4))
    assert [lp.trip_count() for lp in loops(q.body)] == [2, 4]
    assert check_equiv(p, q).equivalent
    with pytest.raises(IllegalTransform):
        apply_transform(p, Tile("L", 3))


def test_outline_isomorphic_groups():
    p = k("A: for (int i = 0; i < 4; i++) { o[i] = a[i] + a[i + 4]; } "
          "B: for (int i = 0; i < 4; i++) { o[i + 4] = a[i + 4] + a[i]; }",
          "const u64 a[8], u64 o[8]")
    groups = outline_groups(p)
    assert groups
    q = apply_transform(p, Outline(tuple(groups[0])))
    assert len(q.functions) == 1
    assert check_equiv(p, q).equivalent


def test_variant_counts():
    single = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v] * c[0]; }")
    vs = enumerate_variants(single, ExplorerConfig(tile_factors=(2, 4)))
    assert len(vs) == 3
    assert vs[0].transforms == ()
    flat = k("o[0] = a[0];")
    assert len(enumerate_variants(flat)) == 1
    many = k(" ".join(f"L{j}: for (int v = 0; v < 8; v++) {{ o[v] = o[v] + a[v] * {j + 2}; }}" for j in range(4)))
    assert len(enumerate_variants(many, ExplorerConfig(max_variants=5))) <= 5


def test_pragma_counts():
    p = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v] * c[0]; }")
    sets = enumerate_pragmas(p, ExplorerConfig(max_unroll=4))
    assert len(sets) == 6
    assert {d.loop("L").unroll for d in sets} == {1, 2, 4}
    assert {d.loop("L").pipeline_ii for d in sets} == {None, 1}
    for pc in sets:
        for arr, f in pc.partition:
            assert p.arrays()[arr][1] % f == 0


def test_pragma_ii_from_recurrence():
    p = k("L: for (int v = 1; v < 8; v++) { t[v] = t[v - 1] * a[v]; }")
    sets = enumerate_pragmas(p, ExplorerConfig(max_unroll=1))
    assert {d.loop("L").pipeline_ii for d in sets} == {None, 4}
    assert all("t" not in d.dependence_false for d in sets)


def test_dependence_false_only_when_not_carried():
    p = k("L: for (int v = 0; v < 8; v++) { t[v] = t[v] + a[v]; }")
    sets = enumerate_pragmas(p, ExplorerConfig(max_unroll=1))
    piped = [d for d in sets if d.loop("L").pipeline_ii is not None]
    assert piped and all(d.dependence_false == ("t",) for d in piped)


def test_loop_free_single_config():
    assert enumerate_pragmas(k("o[0] = a[0];")) == [EMPTY]


def test_point_arithmetic():
    p = k("o[0] = a[0];")
    vs = [Variant(p), Variant(p), Variant(p)]
    sets = [[EMPTY] * 6, [EMPTY] * 6, [EMPTY]]
    pts = synthesize_design_space(vs, sets)
    assert len(pts) == 13
    assert len({x.id for x in pts}) == 13
    assert len(synthesize_design_space([Variant(p)], [[]])) == 1


def test_design_space_deterministic_and_equivalent():
    src = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v] * c[0]; }")
    a = DesignSpace.build(src, ExplorerConfig(max_unroll=4))
    b = DesignSpace.build(src, ExplorerConfig(max_unroll=4))
    assert [(x.id, emit_c(x.program, x.pragmas)) for x in a.points] == [(x.id, emit_c(x.program, x.pragmas))
                                                                        for x in b.points]
    for v in a.variants:
        assert check_equiv(src, v.program).equivalent
        assert side_channel_violations(v.program) == []


def test_explore_bounded_kernel():
    p = parse_program(BOUNDED)
    ds = DesignSpace.build(p, ExplorerConfig(max_unroll=4, n_vectors=100))
    assert ds.points and not ds.warnings
    assert ds.variants[0].transforms[0].kind == "staticize_bounds"
    for v in ds.variants:
        assert side_channel_violations(v.program) == []
