"""Value-flow graph over straight-line code and array synthesis for locals."""
from __future__ import annotations

from dataclasses import dataclass, field

from .ir import (
    Assign, Binary, Builtin, ElemRef, Extern, Load, Local, LocalRef, Program, Shift, Unary, Var,
    is_iexpr, stmt_reads, walk_expr,
)


@dataclass(frozen=True)
class DefNode:
    id: int
    var: str  # local name, or "arr[k]" for an array element
    stmt: int  # -1 for the initial value of an input element
    position: int  # target position within the statement

    @property
    def is_local(self) -> bool:
        return "[" not in self.var


@dataclass(frozen=True)
class UseEdge:
    def_id: int
    stmt: int
    operand: int  # pre-order position among the statement's Var/Load leaves


@dataclass
class DDG:
    defs: list[DefNode] = field(default_factory=list)
    uses: list[UseEdge] = field(default_factory=list)

    def use_count(self, def_id: int) -> int:
        return self._counts().get(def_id, 0)

    def _counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for u in self.uses:
            counts[u.def_id] = counts.get(u.def_id, 0) + 1
        return counts

    def local_defs(self) -> dict[str, DefNode]:
        return {d.var: d for d in self.defs if d.is_local}

    def local_use_counts(self) -> dict[str, int]:
        counts = self._counts()
        return {d.var: counts.get(d.id, 0) for d in self.defs if d.is_local}

    def last_use(self, def_id: int) -> int | None:
        stmts = [u.stmt for u in self.uses if u.def_id == def_id]
        return max(stmts) if stmts else None

    def to_dot(self) -> str:
        counts = self._counts()
        lines = ["digraph ddg {"]
        for d in self.defs:
            where = "input" if d.stmt < 0 else f"s{d.stmt}"
            lines.append(f'  d{d.id} [label="{d.var} @{where} uses={counts.get(d.id, 0)}"];')
        stmts = sorted({u.stmt for u in self.uses} | {d.stmt for d in self.defs if d.stmt >= 0})
        for s in stmts:
            lines.append(f'  s{s} [shape=box,label="s{s}"];')
        for d in self.defs:
            if d.stmt >= 0:
                lines.append(f"  s{d.stmt} -> d{d.id};")
        for u in self.uses:
            lines.append(f'  d{u.def_id} -> s{u.stmt} [label="{u.operand}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _key(leaf_or_target) -> str:
    if isinstance(leaf_or_target, (Var, LocalRef)):
        return leaf_or_target.name
    return f"{leaf_or_target.array}[{leaf_or_target.index}]"


def build_ddg(p: Program) -> DDG:
    g = DDG()
    current: dict[str, int] = {}

    def new_def(var, stmt, pos) -> int:
        d = DefNode(len(g.defs), var, stmt, pos)
        g.defs.append(d)
        return d.id

    for i, s in enumerate(p.body):
        for k, leaf in enumerate(stmt_reads(s)):
            key = _key(leaf)
            if key not in current:
                current[key] = new_def(key, -1, 0)
            g.uses.append(UseEdge(current[key], i, k))
        for pos, t in enumerate(s.targets):
            current[_key(t)] = new_def(_key(t), i, pos)
    return g


def single_use_locals(g: DDG) -> set[str]:
    return {name for name, n in g.local_use_counts().items() if n == 1}


@dataclass
class ArrayAssignment:
    groups: dict[str, tuple[str, int]]  # local -> (array, index)
    synthesized_arrays: list[tuple[str, int, int]]  # (name, width, length)

    def to_json(self) -> dict:
        return {
            "groups": {k: list(v) for k, v in sorted(self.groups.items())},
            "synthesized_arrays": [list(a) for a in self.synthesized_arrays],
        }


def _fresh_name(base: str, taken: set[str]) -> str:
    name = base
    while name in taken:
        name += "_"
    return name


def assign_arrays(p: Program, g: DDG | None = None) -> tuple[Program, ArrayAssignment]:
    """Replace scalar locals by elements of per-width synthesized arrays.

    A single-use local may take over the slot of an earlier single-use local
    once that one has been consumed.  Multi-use locals keep a slot of their own.
    """
    g = g or build_ddg(p)
    scalars = [loc for loc in p.locals if not loc.is_array]
    if not scalars:
        return p, ArrayAssignment({}, [])

    widths = sorted({loc.width for loc in scalars})
    taken = {q.name for q in p.params} | {loc.name for loc in p.locals}
    names: dict[int, str] = {}
    for w in widths:
        names[w] = _fresh_name("t" if len(widths) == 1 else f"t{w}", taken)
        taken.add(names[w])

    defs = g.local_defs()
    counts = g.local_use_counts()
    width_of = {loc.name: loc.width for loc in scalars}
    inputs = {q.name for q in p.params}

    # slot state per width: index -> (release statement or None if permanent)
    slots: dict[int, dict[int, int | None]] = {w: {} for w in widths}
    groups: dict[str, tuple[str, int]] = {}

    def is_free(w: int, k: int, at: int) -> bool:
        if k not in slots[w]:
            return True
        release = slots[w][k]
        return release is not None and release <= at

    for i, s in enumerate(p.body):
        preferred = None
        for leaf in stmt_reads(s):
            if isinstance(leaf, Load) and leaf.array in inputs and isinstance(leaf.index, int):
                preferred = leaf.index
                break
        for t in s.targets:
            if not isinstance(t, LocalRef):
                continue
            w = width_of[t.name]
            single = counts.get(t.name, 0) == 1
            if single:
                d = defs[t.name]
                release = g.last_use(d.id)
                k = preferred if preferred is not None and is_free(w, preferred, i) else None
                if k is None:
                    k = 0
                    while not is_free(w, k, i):
                        k += 1
                slots[w][k] = release
            else:
                k = 0
                while k in slots[w]:
                    k += 1
                slots[w][k] = None
            groups[t.name] = (names[w], k)

    def rewrite(e):
        if isinstance(e, Var) and e.name in groups:
            arr, k = groups[e.name]
            return Load(arr, k, e.width)
        return e

    body = []
    for s in p.body:
        targets = tuple(ElemRef(*groups[t.name]) if isinstance(t, LocalRef) else t for t in s.targets)
        body.append(Assign(targets, _map_leaves(s.rhs, rewrite), s.guard, s.line))

    synthesized = []
    for w in widths:
        length = max((k for a, k in groups.values() if a == names[w]), default=-1) + 1
        if length:
            synthesized.append((names[w], w, length))
    new_locals = tuple(loc for loc in p.locals if loc.is_array) + tuple(
        Local(n, w, length) for n, w, length in synthesized)
    return p.with_body(body, locals=new_locals), ArrayAssignment(groups, synthesized)


def _map_leaves(e, fn):
    out = fn(e)
    if out is not e:
        return out
    if isinstance(e, Unary):
        return Unary(e.op, _map_leaves(e.arg, fn), e.width)
    if isinstance(e, Binary):
        return Binary(e.op, _map_leaves(e.a, fn), _map_leaves(e.b, fn), e.width)
    if isinstance(e, Shift):
        return Shift(e.op, _map_leaves(e.arg, fn), e.amount, e.width)
    if isinstance(e, Builtin):
        return Builtin(e.name, e.width, tuple(a if is_iexpr(a) else _map_leaves(a, fn) for a in e.args))
    if isinstance(e, Extern):
        return Extern(e.name, tuple(_map_leaves(a, fn) for a in e.args), e.width)
    return e


def slot_conflicts(original: Program, assignment: ArrayAssignment) -> list[tuple[str, str]]:
    """Pairs of locals sharing a slot while both live, recomputed from scratch."""
    live: dict[str, tuple[int, int]] = {}
    for i, s in enumerate(original.body):
        for t in s.targets:
            if isinstance(t, LocalRef):
                live[t.name] = (i, i)
        for e in walk_expr(s.rhs):
            if isinstance(e, Var) and e.name in live:
                live[e.name] = (live[e.name][0], i)
    out = []
    names = sorted(assignment.groups)
    for x in names:
        for y in names:
            if x < y and assignment.groups[x] == assignment.groups[y]:
                (dx, ux), (dy, uy) = live[x], live[y]
                # y may be written in the statement that last reads x, not earlier
                if not (ux <= dy or uy <= dx):
                    out.append((x, y))
    return out

