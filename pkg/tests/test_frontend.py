import pytest

from loopsynth.emit import EmitError, emit_c
from loopsynth.interp import check_equiv
from loopsynth.ir import IRError, loops
from loopsynth.parse import parse_program, program_from_json, program_to_json
from loopsynth.pragmas import LoopDirectives, PragmaConfig
from loopsynth.validate import side_channel_violations, validate_straight_line

MINIMAL = "void f(u64 a[2], u64 o[1]){ u64 x0 = a[0]*a[1]; o[0]=x0; }"
LOOPED = """void g(const u64 a[4], u64 o[4]) {
    L0: for (int i = 0; i < 4; i++) {
        o[i] = a[i] * 3;
    }
}
"""


def test_minimal_kernel():
    p = parse_program(MINIMAL)
    assert len(p.locals) == 1
    assert len(p.body) == 2


def test_reassignment_rejected():
    with pytest.raises(IRError, match="reassignment of x0"):
        parse_program("void f(const u64 a[2], u64 o[1]) { u64 x0 = a[0]; u64 x0 = a[1]; o[0] = x0; }")


@pytest.mark.parametrize("src, msg", [
    ("void f(const u64 a[2], u64 o[1]) { o[0] = y; }", "y"),
    ("void f(const u64 a[2], u64 o[1]) { o[0] = a[0] + ; }", "line 1"),
    ("void f(const u64 a[2], u32 o[1]) { o[0] = a[0]; }", "width"),
    ("void f(const u64 a[2], u64 o[1]) { o[0] = a[5]; }", "bounds|range|index"),
])
def test_parse_errors(src, msg):
    with pytest.raises(IRError, match=msg):
        parse_program(src)


def test_syntax_error_has_position():
    with pytest.raises(IRError) as e:
        parse_program("void f(const u64 a[2], u64 o[1]) {\n  o[0] = a[0] $ 1;\n}")
    assert e.value.line == 2


def test_mac_fixture_shape(mac_source):
    p = parse_program(mac_source)
    assert len(p.body) == 8
    assert {q.width for q in p.params} == {64}
    assert validate_straight_line(p) == []


def test_validate_reports_loop():
    problems = validate_straight_line(parse_program(LOOPED))
    assert len(problems) == 1 and problems[0].startswith("loop at line")


def test_validate_reports_unknown_call():
    p = parse_program("void f(const u64 a[1], u64 o[1]) { o[0] = mystery_fn(a[0]); }")
    problems = validate_straight_line(p)
    assert len(problems) == 1 and "non-builtin call" in problems[0]


def test_emit_empty_program():
    text = emit_c(parse_program("void e(const u64 a[1], u64 o[1]) { }"))
    assert "#pragma" not in text
    assert text.startswith("void e(")


def test_pipeline_directive_placement():
    p = parse_program(LOOPED)
    text = emit_c(p, PragmaConfig.make({"L0": LoopDirectives(pipeline_ii=1)}))
    assert text.count("#pragma HLS pipeline II=1") == 1
    lines = text.splitlines()
    k = next(i for i, ln in enumerate(lines) if "#pragma" in ln)
    assert "L0:" in lines[k - 1]


def test_directive_formats():
    p = parse_program(LOOPED)
    pc = PragmaConfig.make({"L0": LoopDirectives(2, 2)}, {"a": 2}, ["o"])
    text = emit_c(p, pc)
    for line in ("#pragma HLS pipeline II=2", "#pragma HLS unroll factor=2",
                 "#pragma HLS array_partition variable=a type=cyclic factor=2",
                 "#pragma HLS dependence variable=o type=inter false"):
        assert line in text


def test_emit_unknown_label():
    with pytest.raises(EmitError):
        emit_c(parse_program(LOOPED), PragmaConfig.make({"nope": LoopDirectives(1)}))


def test_emit_reparses_equivalently():
    p = parse_program(LOOPED)
    text = emit_c(p, PragmaConfig.make({"L0": LoopDirectives(None, 2)}))
    q = parse_program(text)
    assert [lp.label for lp in loops(q.body)] == ["L0"]
    assert check_equiv(p, q).equivalent
    assert emit_c(q) == emit_c(p)


def test_emit_deterministic():
    p = parse_program(LOOPED)
    assert emit_c(p) == emit_c(parse_program(LOOPED))


def test_json_round_trip(mac_source):
    for src in (mac_source, LOOPED, MINIMAL):
        p = parse_program(src)
        assert program_from_json(program_to_json(p)) == p


def test_builtin_tuple_assignment():
    p = parse_program("void m(const u64 a[2], u64 o[2]) { (u64 h, u64 l) = mulwide_u64(a[0], a[1]); o[0] = h; o[1] = l; }")
    assert len(p.body[0].targets) == 2


def test_side_channel_scan():
    p = parse_program("""void b(const u64 a[4], u64 o[4], int n <= 4) {
        L: for (int i = 0; i < n; i++) { if (a[i]) { o[i] = a[i]; } }
    }""")
    v = side_channel_violations(p)
    assert any("branch" in x for x in v) and any("variable loop bound" in x for x in v)
    assert side_channel_violations(parse_program(LOOPED)) == []
