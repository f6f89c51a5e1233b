"""Pretty printer producing ``.slc``/C text with HLS directive lines."""
from __future__ import annotations

from .ir import (
    Assign, Binary, Builtin, CallStmt, Const, ElemRef, Extern, For, If, IOp, Load, LocalRef,
    Program, Shift, Sym, Unary, Var, is_iexpr, loops, walk_expr, walk_stmts,
)
from .pragmas import EMPTY, PragmaConfig


class EmitError(ValueError):
    pass


_CSYM = {"add": "+", "sub": "-", "mul": "*", "and": "&", "or": "|", "xor": "^", "shl": "<<", "shr": ">>"}
_PREC = {"?:": 0, "&&": 1, "|": 2, "^": 3, "&": 4, "==": 5, "!=": 5, "<": 6, "<=": 6, ">": 6, ">=": 6,
         "<<": 7, ">>": 7, "+": 8, "-": 8, "*": 9, "/": 9, "%": 9}
_UNARY_PREC = 10
_ATOM = 11


def _num(v: int) -> str:
    return str(v) if abs(v) < 1 << 16 else (("-" if v < 0 else "") + hex(abs(v)))


def iexpr_str(e, parent: int = 0) -> str:
    if isinstance(e, int):
        s = _num(e)
        return f"({s})" if e < 0 and parent > 0 else s
    if isinstance(e, Sym):
        return e.name
    assert isinstance(e, IOp)
    if e.op == "?:":
        c, a, b = (iexpr_str(x, 1) for x in e.args)
        s = f"{c} ? {a} : {b}"
        return f"({s})" if parent > 0 else s
    if e.op in ("neg", "~"):
        s = ("-" if e.op == "neg" else "~") + iexpr_str(e.args[0], _UNARY_PREC)
        return f"({s})" if parent > _UNARY_PREC else s
    p = _PREC[e.op]
    a = iexpr_str(e.args[0], p)
    b = iexpr_str(e.args[1], p + 1)
    s = f"{a} {e.op} {b}"
    return f"({s})" if parent > p else s


def expr_str(e, parent: int = 0, typed_const: bool = False) -> str:
    if isinstance(e, Const):
        s = iexpr_str(e.value, _ATOM if typed_const else parent)
        return f"(u{e.width}){s}" if typed_const else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Load):
        return f"{e.array}[{iexpr_str(e.index)}]"
    if isinstance(e, Unary):
        if e.op == "not":
            s = "~" + expr_str(e.arg, _UNARY_PREC, True)
        else:
            s = f"(u{e.width})" + expr_str(e.arg, _UNARY_PREC, True)
        return f"({s})" if parent > _UNARY_PREC else s
    if isinstance(e, Shift):
        sym = _CSYM[e.op]
        p = _PREC[sym]
        s = f"{expr_str(e.arg, p, True)} {sym} {iexpr_str(e.amount, _ATOM)}"
        return f"({s})" if parent > p else s
    if isinstance(e, Binary):
        sym = _CSYM[e.op]
        p = _PREC[sym]
        both_const = isinstance(e.a, Const) and isinstance(e.b, Const)
        s = f"{expr_str(e.a, p, both_const)} {sym} {expr_str(e.b, p + 1, both_const)}"
        return f"({s})" if parent > p else s
    if isinstance(e, Builtin):
        args = ", ".join(iexpr_str(a) if is_iexpr(a) else expr_str(a) for a in e.args)
        return f"{e.name}_u{e.width}({args})"
    if isinstance(e, Extern):
        return f"{e.name}({', '.join(expr_str(a) for a in e.args)})"
    raise TypeError(e)


def _target_str(t) -> str:
    if isinstance(t, LocalRef):
        return t.name
    return f"{t.array}[{iexpr_str(t.index)}]"


def _target_read(t, width):
    return Var(t.name, width) if isinstance(t, LocalRef) else Load(t.array, t.index, width)


class _Emitter:
    def __init__(self, p: Program, pragmas: PragmaConfig):
        self.p = p
        self.pragmas = pragmas
        self.lines: list[str] = []
        self.declared: set[str] = set()
        self.arrays_in_loop: dict[str, set[str]] = {}

    def out(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def assign(self, s: Assign, depth: int) -> None:
        rhs = s.rhs
        if s.guard is not None:
            t = s.targets[0]
            w = self.p.target_width(t)
            rhs = Builtin("cmovznz", w, (s.guard, _target_read(t, w), rhs))
        if len(s.targets) == 1:
            t = s.targets[0]
            prefix = ""
            if isinstance(t, LocalRef) and t.name not in self.declared:
                self.declared.add(t.name)
                prefix = f"u{self.p.scalar_width(t.name)} "
            self.out(depth, f"{prefix}{_target_str(t)} = {expr_str(rhs)};")
            return
        parts = []
        for t in s.targets:
            if isinstance(t, LocalRef) and t.name not in self.declared:
                self.declared.add(t.name)
                parts.append(f"u{self.p.scalar_width(t.name)} {t.name}")
            else:
                parts.append(_target_str(t))
        self.out(depth, f"({parts[0]}, {parts[1]}) = {expr_str(rhs)};")

    def loop_header(self, s: For) -> str:
        start, stop = iexpr_str(s.start), iexpr_str(s.stop, _PREC["<"] + 1)
        cmp = "<" if s.step > 0 else ">"
        if s.step == 1:
            inc = f"{s.var}++"
        elif s.step == -1:
            inc = f"{s.var}--"
        elif s.step > 0:
            inc = f"{s.var} += {s.step}"
        else:
            inc = f"{s.var} -= {-s.step}"
        label = f"{s.label}: " if s.label else ""
        return f"{label}for (int {s.var} = {start}; {s.var} {cmp} {stop}; {inc}) {{"

    def body(self, body, depth: int) -> None:
        for s in body:
            if isinstance(s, Assign):
                self.assign(s, depth)
            elif isinstance(s, For):
                self.out(depth, self.loop_header(s))
                d = self.pragmas.loop(s.label)
                if d.pipeline_ii is not None:
                    self.out(depth + 1, f"#pragma HLS pipeline II={d.pipeline_ii}")
                if d.unroll != 1:
                    self.out(depth + 1, f"#pragma HLS unroll factor={d.unroll}")
                for arr in self.pragmas.dependence_false:
                    if arr in self.arrays_in_loop.get(s.label, ()):
                        self.out(depth + 1, f"#pragma HLS dependence variable={arr} type=inter false")
                self.body(s.body, depth + 1)
                self.out(depth, "}")
            elif isinstance(s, If):
                self.out(depth, f"if ({expr_str(s.cond)}) {{")
                self.body(s.body, depth + 1)
                self.out(depth, "}")
            elif isinstance(s, CallStmt):
                arrays = _helper_arrays(self.p, self.p.function(s.func))
                args = [a for a in arrays] + [iexpr_str(a) for a in s.args]
                self.out(depth, f"{s.func}({', '.join(args)});")
            else:
                raise TypeError(s)


def _arrays_touched(body) -> set[str]:
    out: set[str] = set()
    for s in walk_stmts(body):
        if isinstance(s, Assign):
            out |= {t.array for t in s.targets if isinstance(t, ElemRef)}
            out |= {e.array for e in walk_expr(s.rhs) if isinstance(e, Load)}
        elif isinstance(s, If):
            out |= {e.array for e in walk_expr(s.cond) if isinstance(e, Load)}
    return out


def _helper_arrays(p: Program, f) -> list[str]:
    used = _arrays_touched(f.body)
    order = [q.name for q in p.params] + [loc.name for loc in p.locals if loc.is_array]
    return [a for a in order if a in used]


def emit_c(p: Program, pragmas: PragmaConfig = EMPTY) -> str:
    """Render ``p`` deterministically, placing directives per ``pragmas``."""
    labels = {lp.label for lp in loops(p.body)}
    for f in p.functions:
        labels |= {lp.label for lp in loops(f.body)}
    for label, _ in pragmas.loops:
        if label not in labels:
            raise EmitError(f"pragma references unknown loop label {label}")
    arrays = p.arrays()
    for arr in [a for a, _ in pragmas.partition] + list(pragmas.dependence_false):
        if arr not in arrays:
            raise EmitError(f"pragma references unknown array {arr}")

    em = _Emitter(p, pragmas)
    for lp in list(loops(p.body)) + [lp for f in p.functions for lp in loops(f.body)]:
        em.arrays_in_loop[lp.label] = _arrays_touched(lp.body)
    for f in p.functions:
        params = [f"u{arrays[a][0]} {a}[{arrays[a][1]}]" for a in _helper_arrays(p, f)]
        params += [f"int {name}" for name in f.params]
        em.out(0, f"static void {f.name}({', '.join(params)}) {{")
        em.body(f.body, 1)
        em.out(0, "}")
        em.out(0, "")
    params = []
    for q in p.params:
        const = "const " if q.direction == "in" else ""
        params.append(f"{const}u{q.width} {q.name}[{q.length}]")
    params += [f"int {b.name} <= {b.maximum}" for b in p.bounds]
    em.out(0, f"void {p.name}({', '.join(params)}) {{")
    for arr, factor in pragmas.partition:
        em.out(1, f"#pragma HLS array_partition variable={arr} type=cyclic factor={factor}")
    assigned = {t.name for s in walk_stmts(p.body) if isinstance(s, Assign)
                for t in s.targets if isinstance(t, LocalRef)}
    for loc in p.locals:
        if loc.is_array:
            em.out(1, f"u{loc.width} {loc.name}[{loc.length}];")
        elif loc.name not in assigned:
            em.out(1, f"u{loc.width} {loc.name};")
            em.declared.add(loc.name)
    em.body(p.body, 1)
    em.out(0, "}")
    return "\n".join(em.lines) + "\n"
