import random
import re

from loopsynth.dataflow import assign_arrays, build_ddg, single_use_locals, slot_conflicts
from loopsynth.interp import check_equiv
from loopsynth.ir import Load, walk_expr
from loopsynth.parse import parse_program


def test_single_use_count():
    g = build_ddg(parse_program("void f(u64 a[2], u64 o[1]){ u64 x0 = a[0]*a[1]; o[0]=x0; }"))
    d = g.local_defs()["x0"]
    assert g.use_count(d.id) == 1


def test_two_operand_uses():
    g = build_ddg(parse_program("void f(u64 a[2], u64 o[1]){ u64 x0 = a[0]; u64 x1 = x0 + x0; o[0] = x1; }"))
    assert g.use_count(g.local_defs()["x0"].id) == 2
    assert single_use_locals(g) == {"x1"}


def test_mac_counts_match_text_scan(mac_source):
    p = parse_program(mac_source)
    g = build_ddg(p)
    text = mac_source.split("{", 1)[1]
    for name in ("a", "b"):
        for i in range(8):
            d = next(d for d in g.defs if d.var == f"{name}[{i}]")
            assert g.use_count(d.id) == len(re.findall(rf"\b{name}\[{i}\]", text))


def _random_program(rng: random.Random, n: int) -> str:
    lines, names = [], []
    for k in range(n):
        pool = [f"a[{rng.randrange(4)}]"] + names
        x, y = rng.choice(pool), rng.choice(pool)
        lines.append(f"u64 x{k} = {x} {rng.choice('+^*&')} {y};")
        names.append(f"x{k}")
    lines.append(f"o[0] = {names[-1]};")
    lines.append(f"o[1] = {names[rng.randrange(len(names))]};")
    return "void r(const u64 a[4], u64 o[2]) {\n" + "\n".join(lines) + "\n}"


def test_single_use_matches_recount():
    rng = random.Random(5)
    for _ in range(30):
        src = _random_program(rng, rng.randint(2, 9))
        p = parse_program(src)
        body = src.split("{", 1)[1]
        expected = set()
        for loc in p.locals:
            n_uses = len(re.findall(rf"\b{loc.name}\b", body)) - 1  # minus the definition
            if n_uses == 1:
                expected.add(loc.name)
        assert single_use_locals(build_ddg(p)) == expected, src


def test_index_heuristic_example():
    p = parse_program("void s(const u64 a[2], u64 o[2]) { u64 x0 = a[0] << 1; u64 x1 = a[1] << 1; o[0] = x0; o[1] = x1; }")
    q, asg = assign_arrays(p)
    assert asg.groups["x0"] == ("t", 0) and asg.groups["x1"] == ("t", 1)
    assert check_equiv(p, q).equivalent


def test_no_locals_identity():
    p = parse_program("void s(const u64 a[2], u64 o[2]) { o[0] = a[1]; o[1] = a[0]; }")
    q, asg = assign_arrays(p)
    assert q == p and asg.groups == {}


def test_random_programs_preserved():
    rng = random.Random(9)
    for _ in range(25):
        p = parse_program(_random_program(rng, rng.randint(2, 10)))
        q, asg = assign_arrays(p)
        assert check_equiv(p, q, 1000, 2).equivalent
        assert not q.locals or all(loc.is_array for loc in q.locals)
        assert slot_conflicts(p, asg) == []
        widths = {name: w for name, w, _ in asg.synthesized_arrays}
        for local, (arr, _) in asg.groups.items():
            assert widths[arr] == p.scalar_width(local)


def test_mixed_widths_get_separate_arrays():
    p = parse_program("""void w(const u64 a[2], const u64 b[2], u64 o[2], u1 c[1]) {
        (u64 s0, u1 k0) = addcarry_u64(0, a[0], b[0]);
        (u64 s1, u1 k1) = addcarry_u64(k0, a[1], b[1]);
        o[0] = s0; o[1] = s1; c[0] = k1;
    }""")
    q, asg = assign_arrays(p)
    assert {w for _, w, _ in asg.synthesized_arrays} == {1, 64}
    assert check_equiv(p, q).equivalent
    for s in q.body:
        for e in walk_expr(s.rhs):
            if isinstance(e, Load):
                assert isinstance(e.index, int)
