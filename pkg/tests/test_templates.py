from itertools import permutations

from loopsynth.dataflow import assign_arrays
from loopsynth.parse import parse_program
from loopsynth.templates import abstract_program, canonicalize

HDR = "void k(const u64 a[4], const u64 b[4], const u64 c[1], u64 t[4], u64 x[1]) {"


def stmts(body):
    return parse_program(HDR + body + "}").body


def test_commutative_unify():
    s1, s2 = stmts("x[0] = a[0] * b[1]; x[0] = b[1] * a[0];")
    assert canonicalize(s1) == canonicalize(s2)


def test_noncommutative_differs():
    s1, s2 = stmts("x[0] = a[0] - b[1]; x[0] = b[1] - a[0];")
    assert canonicalize(s1) != canonicalize(s2)


def test_all_orderings_agree():
    terms = ["a[0] * b[2]", "b[2] * a[0]"], ["a[1] * b[1]", "b[1] * a[1]"]
    forms = set()
    for left in terms[0]:
        for right in terms[1]:
            for l, r in permutations([left, right]):
                (s,) = stmts(f"x[0] = ({l}) + ({r});")
                forms.add(canonicalize(s))
    assert len(forms) == 1


def test_four_instances():
    p = parse_program(HDR + "".join(f"t[{i}] = a[{i}] * c[0];" for i in range(4)) + "}")
    (seq,) = abstract_program(p)
    assert len(seq.instances) == 4
    assert [inst.consts for inst in seq.instances] == [(i, i, 0) for i in range(4)]  # t index, a index, c index
    for s, inst in zip(p.body, seq.instances):
        assert seq.template.instantiate(inst.consts) == canonicalize(s)


def test_singleton():
    p = parse_program(HDR + "t[0] = a[0];}")
    (seq,) = abstract_program(p)
    assert len(seq.instances) == 1


def test_alternating_templates_stay_separate():
    p = parse_program(HDR + "t[0] = a[0] + b[0]; t[1] = a[1] * b[1]; t[2] = a[2] + b[2]; t[3] = a[3] * b[3];}")
    seqs = abstract_program(p)
    assert [len(s.instances) for s in seqs] == [1, 1, 1, 1]


def test_partition_and_reconstruction(mac_source):
    p, _ = assign_arrays(parse_program(mac_source))
    seqs = abstract_program(p)
    lines = sorted(inst.line_no for s in seqs for inst in s.instances)
    assert lines == list(range(len(p.body)))
    for s in seqs:
        for inst in s.instances:
            assert s.template.instantiate(inst.consts) == canonicalize(p.body[inst.line_no])
    assert abstract_program(p) == seqs
