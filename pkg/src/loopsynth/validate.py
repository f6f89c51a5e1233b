"""Static checks: IR well-formedness, the straight-line gate, and the
constant-time structure scan applied to every emitted program."""
from __future__ import annotations

from .ir import (
    Assign, Binary, Builtin, CallStmt, Const, ElemRef, Extern, For, If, IRError, Load, LocalRef,
    Program, Shift, Unary, Var, WIDTHS, children, is_iexpr, isyms, mask, walk_expr,
)


class _Checker:
    def __init__(self, p: Program):
        self.p = p
        self.arrays = p.arrays()
        self.scalars = {loc.name: loc.width for loc in p.locals if not loc.is_array}
        self.bound_names = {b.name for b in p.bounds}
        self.assigned: set[str] = set()
        self.written: set[str] = set()

    def fail(self, msg, line=None):
        raise IRError(msg, line or None)

    def iexpr(self, e, syms, line, what):
        free = isyms(e) - syms
        if free:
            self.fail(f"{what} refers to unknown symbol(s) {sorted(free)}", line)

    def index(self, array, idx, syms, line):
        if array not in self.arrays:
            self.fail(f"undeclared array {array}", line)
        if not is_iexpr(idx):
            self.fail(f"non-constant array index on {array}", line)
        self.iexpr(idx, syms, line, f"index of {array}")
        n = self.arrays[array][1]
        if isinstance(idx, int) and not 0 <= idx < n:
            self.fail(f"index {idx} out of bounds for {array}[{n}]", line)

    def expr(self, e, syms, line) -> int:
        if isinstance(e, Const):
            if e.width not in WIDTHS:
                self.fail(f"bad width u{e.width}", line)
            self.iexpr(e.value, syms, line, "constant")
            if isinstance(e.value, int) and not 0 <= e.value <= mask(e.width):
                self.fail(f"constant {e.value} does not fit in u{e.width}", line)
            return e.width
        if isinstance(e, Var):
            if e.name not in self.scalars:
                self.fail(f"undeclared identifier {e.name}", line)
            if e.name not in self.assigned:
                self.fail(f"use of {e.name} before assignment", line)
            if e.width != self.scalars[e.name]:
                self.fail(f"width mismatch on {e.name}", line)
            return e.width
        if isinstance(e, Load):
            self.index(e.array, e.index, syms, line)
            if e.width != self.arrays[e.array][0]:
                self.fail(f"width mismatch on {e.array}", line)
            return e.width
        if isinstance(e, Unary):
            w = self.expr(e.arg, syms, line)
            ok = {"not": e.width == w, "trunc": e.width < w, "zext": e.width > w}.get(e.op, False)
            if not ok or e.width not in WIDTHS:
                self.fail(f"width mismatch in {e.op}: u{w} -> u{e.width}", line)
            return e.width
        if isinstance(e, Binary):
            wa, wb = self.expr(e.a, syms, line), self.expr(e.b, syms, line)
            if not wa == wb == e.width:
                self.fail(f"width mismatch: u{wa} {e.op} u{wb}", line)
            return e.width
        if isinstance(e, Shift):
            w = self.expr(e.arg, syms, line)
            self.iexpr(e.amount, syms, line, "shift amount")
            if w != e.width:
                self.fail("width mismatch in shift", line)
            if isinstance(e.amount, int) and not 0 <= e.amount < w:
                self.fail(f"shift amount {e.amount} out of range for u{w}", line)
            return e.width
        if isinstance(e, Builtin):
            w = e.width
            if e.name in ("addcarry", "subborrow"):
                expected = (1, w, w)
            elif e.name == "mulwide":
                expected = (w, w)
            elif e.name == "cmovznz":
                expected = (None, w, w)
            else:
                self.fail(f"unknown builtin {e.name}", line)
            if len(e.args) != len(expected):
                self.fail(f"{e.name}_u{w} takes {len(expected)} arguments", line)
            for a, ew in zip(e.args, expected):
                if ew is None and is_iexpr(a):
                    self.iexpr(a, syms, line, "select flag")
                    continue
                aw = self.expr(a, syms, line)
                if ew is not None and aw != ew:
                    self.fail(f"width mismatch: {e.name}_u{w} expects u{ew}, got u{aw}", line)
            return w
        if isinstance(e, Extern):
            for a in e.args:
                self.expr(a, syms, line)
            return e.width
        raise TypeError(e)

    def body(self, body, syms, loop_vars, in_helper):
        for s in body:
            line = getattr(s, "line", None)
            if isinstance(s, Assign):
                widths = self.rhs_widths(s, syms | loop_vars, line)
                if len(widths) != len(s.targets):
                    self.fail("target count does not match right-hand side", line)
                if s.guard is not None:
                    if len(s.targets) != 1:
                        self.fail("guarded writes must have a single target", line)
                    self.iexpr(s.guard, syms | loop_vars, line, "guard")
                for t, w in zip(s.targets, widths):
                    self.target(t, w, syms | loop_vars, loop_vars, in_helper, line)
                if len(s.targets) == 2 and s.targets[0] == s.targets[1]:
                    self.fail("both tuple targets name the same location", line)
            elif isinstance(s, For):
                if s.var in syms or s.var in loop_vars or s.var in self.scalars or s.var in self.arrays:
                    self.fail(f"loop variable {s.var} shadows another name", line)
                if s.step == 0:
                    self.fail("loop step must be nonzero", line)
                self.iexpr(s.start, syms | loop_vars, line, "loop start")
                self.iexpr(s.stop, syms | loop_vars, line, "loop bound")
                self.body(s.body, syms, loop_vars | {s.var}, in_helper)
            elif isinstance(s, If):
                if is_iexpr(s.cond):
                    self.fail("if condition must be a runtime value", line)
                self.expr(s.cond, syms | loop_vars, line)
                self.body(s.body, syms, loop_vars, in_helper)
            elif isinstance(s, CallStmt):
                f = self.p.function(s.func)
                if f is None:
                    self.fail(f"call to undefined function {s.func}", line)
                if len(s.args) != len(f.params):
                    self.fail(f"{s.func} expects {len(f.params)} arguments", line)
                for a in s.args:
                    self.iexpr(a, syms | loop_vars, line, "call argument")
            else:
                raise TypeError(s)

    def rhs_widths(self, s, syms, line):
        rhs = s.rhs
        w = self.expr(rhs, syms, line)
        if isinstance(rhs, Builtin):
            return rhs.result_widths
        return (w,)

    def target(self, t, w, syms, loop_vars, in_helper, line):
        if isinstance(t, LocalRef):
            if t.name not in self.scalars:
                self.fail(f"undeclared identifier {t.name}", line)
            if t.name in self.assigned:
                self.fail(f"reassignment of {t.name}", line)
            if loop_vars or in_helper:
                self.fail(f"local {t.name} assigned inside a loop", line)
            if self.scalars[t.name] != w:
                self.fail(f"width mismatch: u{w} assigned to {t.name} (u{self.scalars[t.name]})", line)
            self.assigned.add(t.name)
        elif isinstance(t, ElemRef):
            self.index(t.array, t.index, syms, line)
            if self.arrays[t.array][0] != w:
                self.fail(f"width mismatch: u{w} assigned to {t.array} (u{self.arrays[t.array][0]})", line)
            self.written.add(t.array)
        else:
            raise TypeError(t)


def check_program(p: Program) -> None:
    """Raise :class:`IRError` unless ``p`` is well formed."""
    names = [q.name for q in p.params] + [loc.name for loc in p.locals] + [b.name for b in p.bounds]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise IRError(f"duplicate declaration of {sorted(dup)[0]}")
    for q in p.params:
        if q.direction not in ("in", "out") or q.width not in WIDTHS or q.length <= 0:
            raise IRError(f"bad parameter {q.name}")
    for loc in p.locals:
        if loc.width not in WIDTHS or (loc.is_array and loc.length <= 0):
            raise IRError(f"bad local {loc.name}")
    chk = _Checker(p)
    bounds = set(chk.bound_names)
    for f in p.functions:
        saved = chk.assigned
        chk.assigned = set()
        chk.body(f.body, set(f.params) | bounds, frozenset(), True)
        chk.assigned = saved
    chk.body(p.body, bounds, frozenset(), False)
    for q in p.params:
        if q.direction == "in" and q.name in chk.written:
            raise IRError(f"input array {q.name} is written")


def validate_straight_line(p: Program) -> list[str]:
    """Violations that keep ``p`` from being straight-line code; empty if it is."""
    out: list[str] = []

    def externs(e):
        if isinstance(e, Extern):
            yield e
        for c in children(e):
            yield from externs(c)

    def visit(body):
        for s in body:
            line = getattr(s, "line", 0)
            if isinstance(s, For):
                out.append(f"loop at line {line}")
                visit(s.body)
            elif isinstance(s, If):
                out.append(f"branch at line {line}")
                for x in externs(s.cond):
                    out.append(f"non-builtin call {x.name} at line {line}")
                visit(s.body)
            elif isinstance(s, CallStmt):
                out.append(f"non-builtin call {s.func} at line {line}")
            elif isinstance(s, Assign):
                for x in externs(s.rhs):
                    out.append(f"non-builtin call {x.name} at line {line}")

    visit(p.body)
    return out


def side_channel_violations(p: Program) -> list[str]:
    """Data-dependent branches and variable loop bounds anywhere in ``p``."""
    bound_names = {b.name for b in p.bounds}
    out: list[str] = []

    def visit(body, where):
        for s in body:
            line = getattr(s, "line", 0)
            if isinstance(s, If):
                out.append(f"data-dependent branch at line {line}{where}")
                visit(s.body, where)
            elif isinstance(s, For):
                if (isyms(s.start) | isyms(s.stop)) & bound_names:
                    out.append(f"variable loop bound on {s.label or s.var}{where}")
                visit(s.body, where)
            elif isinstance(s, Assign):
                if any(isinstance(e, Extern) for e in walk_expr(s.rhs)):
                    out.append(f"opaque call at line {line}{where}")

    visit(p.body, "")
    for f in p.functions:
        visit(f.body, f" in {f.name}")
    return out
