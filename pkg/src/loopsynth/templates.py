"""Statement canonicalization and grouping into holed templates."""
from __future__ import annotations

from dataclasses import dataclass

from .emit import expr_str, iexpr_str
from .ir import (
    COMMUTATIVE, Assign, Binary, Builtin, Const, ElemRef, Extern, Load, LocalRef, Program,
    Shift, Sym, Unary, Var, is_iexpr, isubst, walk_expr,
)

HOLE_PREFIX = "H"


# --------------------------------------------------------------------------
# canonical form


def _ikey(e) -> tuple:
    if isinstance(e, int):
        return (0, e)
    if isinstance(e, Sym):
        return (1, e.name)
    return (2, e.op, tuple(_ikey(a) for a in e.args))


def _shape_key(e) -> tuple:
    """Structure with literal values erased, so shape decides order before values."""
    if isinstance(e, Const):
        return ("const", e.width)
    if isinstance(e, Var):
        return ("var", e.width, e.name)
    if isinstance(e, Load):
        return ("load", e.width, e.array)
    if isinstance(e, Unary):
        return ("unary", e.op, e.width, _shape_key(e.arg))
    if isinstance(e, Binary):
        return ("binary", e.op, e.width, _shape_key(e.a), _shape_key(e.b))
    if isinstance(e, Shift):
        return ("shift", e.op, e.width, _shape_key(e.arg))
    if isinstance(e, Builtin):
        return ("builtin", e.name, e.width, tuple(("i",) if is_iexpr(a) else _shape_key(a) for a in e.args))
    return ("extern", e.name, e.width, tuple(_shape_key(a) for a in e.args))


def _value_key(e) -> tuple:
    return tuple(_ikey(v) for _, v in _expr_slots(e))


def sort_key(e) -> tuple:
    return (_shape_key(e), _value_key(e))


def canonical_expr(e):
    if isinstance(e, Unary):
        return Unary(e.op, canonical_expr(e.arg), e.width)
    if isinstance(e, Shift):
        return Shift(e.op, canonical_expr(e.arg), e.amount, e.width)
    if isinstance(e, Binary):
        a, b = canonical_expr(e.a), canonical_expr(e.b)
        if e.op in COMMUTATIVE and sort_key(b) < sort_key(a):
            a, b = b, a
        return Binary(e.op, a, b, e.width)
    if isinstance(e, Builtin):
        return Builtin(e.name, e.width, tuple(a if is_iexpr(a) else canonical_expr(a) for a in e.args))
    if isinstance(e, Extern):
        return Extern(e.name, tuple(canonical_expr(a) for a in e.args), e.width)
    return e


def canonicalize(s: Assign) -> Assign:
    """Sort commutative operands by a structural key; no folding."""
    return Assign(s.targets, canonical_expr(s.rhs), s.guard, s.line)


# --------------------------------------------------------------------------
# literal slots


def _slots(s: Assign) -> list[tuple[str, object]]:
    """(kind, literal) for every compile-time literal, targets first then rhs pre-order."""
    out = [("index", t.index) for t in s.targets if isinstance(t, ElemRef)]
    return out + _expr_slots(s.rhs)


def _expr_slots(rhs) -> list[tuple[str, object]]:
    out = []
    for e in walk_expr(rhs):
        if isinstance(e, Load):
            out.append(("index", e.index))
        elif isinstance(e, Const):
            out.append(("const", e.value))
        elif isinstance(e, Shift):
            out.append(("shift", e.amount))
        elif isinstance(e, Builtin):
            out.extend(("const", a) for a in e.args if is_iexpr(a))
    return out


def _fill(s: Assign, values: list) -> Assign:
    """Rebuild ``s`` with its literal slots replaced by ``values`` in slot order."""
    it = iter(values)
    targets = tuple(ElemRef(t.array, next(it)) if isinstance(t, ElemRef) else t for t in s.targets)

    def visit(e):
        if isinstance(e, Load):
            return Load(e.array, next(it), e.width)
        if isinstance(e, Const):
            return Const(next(it), e.width)
        if isinstance(e, Shift):
            amount = next(it)
            return Shift(e.op, visit(e.arg), amount, e.width)
        if isinstance(e, Unary):
            return Unary(e.op, visit(e.arg), e.width)
        if isinstance(e, Binary):
            a = visit(e.a)
            return Binary(e.op, a, visit(e.b), e.width)
        if isinstance(e, Builtin):
            return Builtin(e.name, e.width, tuple(next(it) if is_iexpr(a) else visit(a) for a in e.args))
        if isinstance(e, Extern):
            return Extern(e.name, tuple(visit(a) for a in e.args), e.width)
        return e

    rhs = visit(s.rhs)
    return Assign(targets, rhs, s.guard, s.line)


def _hole(k: int) -> Sym:
    return Sym(f"{HOLE_PREFIX}{k}")


# --------------------------------------------------------------------------
# templates


@dataclass(frozen=True)
class Template:
    id: str
    stmt: Assign  # literal holes appear as Sym("H<k>")
    hole_kinds: tuple

    @property
    def hole_count(self) -> int:
        return len(self.hole_kinds)

    def instantiate(self, consts) -> Assign:
        if len(consts) != self.hole_count:
            raise ValueError(f"template {self.id} expects {self.hole_count} constants")
        mapping = {f"{HOLE_PREFIX}{k}": c for k, c in enumerate(consts)}
        return _fill(self.stmt, [isubst(v, mapping) for _, v in _slots(self.stmt)])

    def text(self) -> str:
        t = ", ".join(x.name if isinstance(x, LocalRef) else f"{x.array}[{iexpr_str(x.index)}]"
                      for x in self.stmt.targets)
        if len(self.stmt.targets) > 1:
            t = f"({t})"
        return f"{t} = {expr_str(self.stmt.rhs)}"


@dataclass(frozen=True)
class Instance:
    line_no: int  # statement index in the program body
    consts: tuple


@dataclass
class AbstractSequence:
    template: Template
    instances: list
    excluded: bool = False

    @property
    def template_id(self) -> str:
        return self.template.id

    def to_json(self) -> dict:
        return {
            "template_id": self.template_id,
            "excluded": self.excluded,
            "instances": [{"line_no": i.line_no, "consts": list(i.consts)} for i in self.instances],
        }


def _rollable(s: Assign) -> bool:
    if s.guard is not None:
        return False
    if any(isinstance(t, LocalRef) for t in s.targets):
        return False
    if any(isinstance(e, Extern) for e in walk_expr(s.rhs)):
        return False
    return all(isinstance(v, int) for _, v in _slots(s))


def abstract_program(p: Program) -> list[AbstractSequence]:
    stmts = [canonicalize(s) for s in p.body]
    full = []  # fully holed skeleton per statement, or None when not rollable
    for i, s in enumerate(stmts):
        if _rollable(s):
            n = len(_slots(s))
            full.append(_fill(s, [_hole(k) for k in range(n)]))
        else:
            full.append(None)

    runs: list[list[int]] = []
    for i in range(len(stmts)):
        if runs and full[i] is not None and full[runs[-1][-1]] == full[i]:
            runs[-1].append(i)
        else:
            runs.append([i])

    registry: dict[Assign, Template] = {}
    seqs = []
    for run in runs:
        first = stmts[run[0]]
        slots = [_slots(stmts[i]) for i in run]
        kinds = [k for k, _ in slots[0]]
        holed = []
        for pos, kind in enumerate(kinds):
            values = {sl[pos][1] for sl in slots}
            rollable = full[run[0]] is not None
            holed.append(rollable and (kind == "index" or len(values) > 1))
        fill, hole_kinds, k = [], [], 0
        for pos, (kind, value) in enumerate(slots[0]):
            if holed[pos]:
                fill.append(_hole(k))
                hole_kinds.append(kind)
                k += 1
            else:
                fill.append(value)
        shape = _fill(first, fill)
        shape = Assign(shape.targets, shape.rhs, shape.guard)
        if full[run[0]] is None:
            tpl = Template(f"S{len(seqs)}", shape, tuple(hole_kinds))
        elif shape in registry:
            tpl = registry[shape]
        else:
            tpl = Template(f"T{len(registry)}", shape, tuple(hole_kinds))
            registry[shape] = tpl
        instances = [Instance(i, tuple(v for pos, (_, v) in enumerate(slots[j]) if holed[pos]))
                     for j, i in enumerate(run)]
        seqs.append(AbstractSequence(tpl, instances))
    return seqs


def templates_of(seqs) -> dict[str, Template]:
    return {s.template.id: s.template for s in seqs}


def templates_json(seqs) -> dict:
    return {
        "templates": [{"id": t.id, "shape": t.text(), "hole_count": t.hole_count, "hole_kinds": list(t.hole_kinds)}
                      for t in templates_of(seqs).values()],
        "sequences": [s.to_json() for s in seqs],
    }
