"""Loop transformations with legality gates."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from itertools import product

from ..ir import (
    Assign, Binary, Builtin, CallStmt, Const, ElemRef, For, FuncDef, If, IOp, Load, LocalRef, Program,
    Shift, Sym, Unary, Var, iaffine, ieval, iop, is_iexpr, isyms, loops, map_iexprs, subst_stmt,
    walk_stmts,
)
from ..templates import _fill, _slots
from ..validate import check_program
from .analysis import _contexts, bound_env, collect_accesses, conflicts, iteration_accesses


class IllegalTransform(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class Transform:
    kind = "transform"

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    def __str__(self) -> str:
        args = ", ".join(str(getattr(self, f.name)) for f in fields(self))
        return f"{self.kind}({args})"


@dataclass(frozen=True)
class Interchange(Transform):
    outer: str
    inner: str
    kind = "interchange"


@dataclass(frozen=True)
class Pad(Transform):
    loop: str
    new_trip: int
    kind = "pad"


@dataclass(frozen=True)
class Fuse(Transform):
    first: str
    second: str
    kind = "fuse"


@dataclass(frozen=True)
class Perfectize(Transform):
    nest: str
    kind = "perfectize"


@dataclass(frozen=True)
class BranchEliminate(Transform):
    loop: str = "*"
    kind = "branch_eliminate"


@dataclass(frozen=True)
class StrengthReduce(Transform):
    stmt: str = "*"
    kind = "strength_reduce"


@dataclass(frozen=True)
class Tile(Transform):
    loop: str
    factor: int
    kind = "tile"


@dataclass(frozen=True)
class Outline(Transform):
    group: tuple
    kind = "outline"


@dataclass(frozen=True)
class StaticizeBounds(Transform):
    kind = "staticize_bounds"


# --------------------------------------------------------------------------
# helpers


def _names(p: Program) -> set[str]:
    out = {q.name for q in p.params} | {loc.name for loc in p.locals} | {b.name for b in p.bounds}
    for f in p.functions:
        out |= set(f.params) | {f.name}
        out |= {lp.var for lp in loops(f.body)}
    out |= {lp.var for lp in loops(p.body)}
    return out


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    k = 0
    while name in taken:
        k += 1
        name = f"{base}{k}"
    taken.add(name)
    return name


def _find(p: Program, label: str) -> For:
    for lp in loops(p.body):
        if lp.label == label:
            return lp
    raise IllegalTransform(f"no loop labelled {label}")


def _rewrite_loop(body, label: str, fn) -> tuple:
    out = []
    for s in body:
        if isinstance(s, For) and s.label == label:
            out.extend(fn(s))
        elif isinstance(s, For):
            out.append(replace(s, body=_rewrite_loop(s.body, label, fn)))
        elif isinstance(s, If):
            out.append(replace(s, body=_rewrite_loop(s.body, label, fn)))
        else:
            out.append(s)
    return tuple(out)


def _constant_bounds(lp: For) -> None:
    if isyms(lp.start) or isyms(lp.stop):
        raise IllegalTransform(f"loop {lp.label} has non-constant bounds")


def _add_guard(body, cond) -> tuple:
    out = []
    for s in body:
        if isinstance(s, Assign):
            if len(s.targets) != 1:
                raise IllegalTransform("predicated writes need single-target statements")
            g = cond if s.guard is None else iop("&&", cond, s.guard)
            out.append(replace(s, guard=g))
        elif isinstance(s, (For, If)):
            out.append(replace(s, body=_add_guard(s.body, cond)))
        else:
            raise IllegalTransform("cannot predicate a call")
    return tuple(out)


def _last_value(lp: For, env=None) -> int:
    return lp.start + (lp.trip_count(env) - 1) * lp.step


# --------------------------------------------------------------------------
# transforms


def _interchange(p: Program, t: Interchange) -> Program:
    outer = _find(p, t.outer)
    if len(outer.body) != 1 or not isinstance(outer.body[0], For) or outer.body[0].label != t.inner:
        raise IllegalTransform("interchange needs a perfect two-level nest")
    inner = outer.body[0]
    if outer.var in isyms(inner.start) | isyms(inner.stop):
        raise IllegalTransform("inner bounds depend on the outer variable")
    _constant_bounds(outer)
    for lp, env, *_ in _contexts(p, bound_env(p)):
        if lp.label != t.outer:
            continue
        points = []
        for i in outer.values(env):
            for j in inner.values(env):
                r, w = set(), set()
                collect_accesses(p, inner.body, {**env, outer.var: i, inner.var: j}, r, w)
                points.append((i, j, (r, w)))
        for a in range(len(points)):
            for b in range(a + 1, len(points)):
                (i1, j1, x), (i2, j2, y) = points[a], points[b]
                # outer advances while inner goes back: (<, >) direction
                if i1 != i2 and (j2 - j1) * inner.step < 0 and conflicts(x, y):
                    raise IllegalTransform("interchange would reverse a dependence")
    swapped = For(inner.var, inner.start, inner.stop, inner.step,
                  (For(outer.var, outer.start, outer.stop, outer.step, inner.body, outer.label),),
                  inner.label)
    return p.with_body(_rewrite_loop(p.body, t.outer, lambda _: [swapped]))


def _pad(p: Program, t: Pad) -> Program:
    lp = _find(p, t.loop)
    _constant_bounds(lp)
    n = lp.trip_count()
    if t.new_trip <= n:
        raise IllegalTransform("padding must increase the trip count")
    if n == 0:
        raise IllegalTransform("cannot pad an empty loop")
    last = _last_value(lp)
    v = Sym(lp.var)
    cmp = "<=" if lp.step > 0 else ">="
    clamp = iop("?:", iop(cmp, v, last), v, last)
    body = tuple(subst_stmt(s, {lp.var: clamp}) for s in lp.body)
    body = _add_guard(body, iop(cmp, v, last))
    new = replace(lp, stop=lp.start + t.new_trip * lp.step, body=body)
    return p.with_body(_rewrite_loop(p.body, t.loop, lambda _: [new]))


def _sibling_pairs(body):
    """Adjacent (first, second) loop pairs in any statement list."""
    for a, b in zip(body, body[1:]):
        if isinstance(a, For) and isinstance(b, For):
            yield a, b
    for s in body:
        if isinstance(s, (For, If)):
            yield from _sibling_pairs(s.body)


def _fuse(p: Program, t: Fuse) -> Program:
    pair = next(((a, b) for a, b in _sibling_pairs(p.body) if a.label == t.first and b.label == t.second), None)
    if pair is None:
        raise IllegalTransform("fusion needs two adjacent loops")
    l1, l2 = pair
    _constant_bounds(l1)
    _constant_bounds(l2)
    if l1.trip_count() != l2.trip_count():
        raise IllegalTransform("trip counts differ")
    for lp, env, *_ in _contexts(p, bound_env(p)):
        if lp.label != t.first:
            continue
        it1 = iteration_accesses(p, l1, env)
        it2 = iteration_accesses(p, l2, env)
        for i, x in enumerate(it1):
            for j in range(i):
                if conflicts(x, it2[j]):
                    raise IllegalTransform("fusion-preventing dependence")
    taken = _names(p)
    nested = {lp.var for lp in loops(l1.body)} | {lp.var for lp in loops(l2.body)}
    if l1.start == 0 and l1.step == 1 and l1.var not in nested:
        k = l1.var
    else:
        k = _fresh("k", taken | nested)
    kv = Sym(k)
    b1 = tuple(subst_stmt(s, {l1.var: iop("+", l1.start, iop("*", l1.step, kv))}) for s in l1.body)
    b2 = tuple(subst_stmt(s, {l2.var: iop("+", l2.start, iop("*", l2.step, kv))}) for s in l2.body)
    fused = For(k, 0, l1.trip_count(), 1, b1 + b2, l1.label)

    def visit(body):
        out = []
        skip = False
        for s in body:
            if skip:
                skip = False
                continue
            if isinstance(s, For) and s is l1:
                out.append(fused)
                skip = True
            elif isinstance(s, (For, If)):
                out.append(replace(s, body=visit(s.body)))
            else:
                out.append(s)
        return tuple(out)

    return p.with_body(visit(p.body))


def _perfectize(p: Program, t: Perfectize) -> Program:
    outer = _find(p, t.nest)
    inner_idx = [k for k, s in enumerate(outer.body) if isinstance(s, For)]
    if len(inner_idx) != 1 or len(outer.body) == 1:
        raise IllegalTransform("nest is not an imperfect two-level nest")
    k = inner_idx[0]
    inner = outer.body[k]
    pre, post = outer.body[:k], outer.body[k + 1:]
    if not all(isinstance(s, Assign) for s in pre + post):
        raise IllegalTransform("only plain statements can be sunk into the inner loop")
    _constant_bounds(inner)
    if inner.trip_count() == 0:
        raise IllegalTransform("inner loop may not execute")
    j = Sym(inner.var)
    first = _add_guard(pre, iop("==", j, inner.start))
    last = _add_guard(post, iop("==", j, _last_value(inner)))
    new_inner = replace(inner, body=first + inner.body + last)
    return p.with_body(_rewrite_loop(p.body, t.nest, lambda lp: [replace(lp, body=(new_inner,))]))


def _target_read(p: Program, t):
    w = p.target_width(t)
    return (Var(t.name, w) if isinstance(t, LocalRef) else Load(t.array, t.index, w)), w


def _eliminate(p: Program, body, cond=None) -> tuple:
    """Turn ifs into selects; ``cond`` is the predicate of the enclosing branch."""
    out = []
    for s in body:
        if isinstance(s, If):
            inner = _eliminate(p, s.body, s.cond)
            out.extend(inner if cond is None else _eliminate(p, inner, cond))
        elif isinstance(s, Assign) and cond is not None:
            if len(s.targets) != 1:
                raise IllegalTransform("branch elimination needs single-target statements")
            old, w = _target_read(p, s.targets[0])
            out.append(replace(s, rhs=Builtin("cmovznz", w, (cond, old, s.rhs))))
        elif isinstance(s, For):
            out.append(replace(s, body=_eliminate(p, s.body, cond)))
        elif isinstance(s, CallStmt) and cond is not None:
            raise IllegalTransform("cannot predicate a call")
        else:
            out.append(s)
    return tuple(out)


def _branch_eliminate(p: Program, t: BranchEliminate) -> Program:
    if not any(isinstance(s, If) for s in walk_stmts(p.body)):
        raise IllegalTransform("no branches to eliminate")
    if t.loop == "*":
        return p.with_body(_eliminate(p, p.body))
    return p.with_body(_rewrite_loop(p.body, t.loop, lambda lp: [replace(lp, body=_eliminate(p, lp.body))]))


def _pow2(v) -> int | None:
    if isinstance(v, int) and v > 1 and v & (v - 1) == 0:
        return v.bit_length() - 1
    return None


def _reduce_iexpr(e):
    if isinstance(e, IOp):
        args = tuple(_reduce_iexpr(a) for a in e.args)
        if e.op == "%" and _pow2(args[1]) is not None:
            return IOp("&", (args[0], args[1] - 1))
        return IOp(e.op, args)
    return e


def _reduce_expr(e):
    if isinstance(e, Binary):
        a, b = _reduce_expr(e.a), _reduce_expr(e.b)
        if e.op == "mul":
            for x, y in ((a, b), (b, a)):
                if isinstance(y, Const):
                    k = _pow2(y.value)
                    if k is not None and k < e.width:
                        return Shift("shl", x, k, e.width)
        return Binary(e.op, a, b, e.width)
    if isinstance(e, Unary):
        return Unary(e.op, _reduce_expr(e.arg), e.width)
    if isinstance(e, Shift):
        return Shift(e.op, _reduce_expr(e.arg), e.amount, e.width)
    if isinstance(e, Builtin):
        return Builtin(e.name, e.width, tuple(a if is_iexpr(a) else _reduce_expr(a) for a in e.args))
    return e


def _strength_reduce_stmt(s):
    if isinstance(s, Assign):
        rhs = map_iexprs(_reduce_expr(s.rhs), _reduce_iexpr)
        targets = tuple(ElemRef(x.array, _reduce_iexpr(x.index)) if isinstance(x, ElemRef) else x
                        for x in s.targets)
        guard = None if s.guard is None else _reduce_iexpr(s.guard)
        return Assign(targets, rhs, guard, s.line)
    if isinstance(s, For):
        return replace(s, start=_reduce_iexpr(s.start), stop=_reduce_iexpr(s.stop),
                       body=tuple(_strength_reduce_stmt(c) for c in s.body))
    if isinstance(s, If):
        return replace(s, cond=_reduce_expr(s.cond), body=tuple(_strength_reduce_stmt(c) for c in s.body))
    return s


def _strength_reduce(p: Program, t: StrengthReduce) -> Program:
    body = tuple(_strength_reduce_stmt(s) for s in p.body)
    functions = tuple(replace(f, body=tuple(_strength_reduce_stmt(s) for s in f.body)) for f in p.functions)
    if body == p.body and functions == p.functions:
        raise IllegalTransform("nothing to strength-reduce")
    return replace(p, body=body, functions=functions)


def _tile(p: Program, t: Tile) -> Program:
    lp = _find(p, t.loop)
    _constant_bounds(lp)
    n = lp.trip_count()
    if not 1 < t.factor < n or n % t.factor:
        raise IllegalTransform(f"tile factor {t.factor} does not divide trip count {n}")
    taken = _names(p)
    vo, vi = _fresh(f"{lp.var}_o", taken), _fresh(f"{lp.var}_i", taken)
    pos = iop("+", iop("*", Sym(vo), t.factor), Sym(vi))
    value = iop("+", lp.start, iop("*", lp.step, pos)) if lp.step != 1 else iop("+", pos, lp.start)
    body = tuple(subst_stmt(s, {lp.var: value}) for s in lp.body)
    inner = For(vi, 0, t.factor, 1, body, f"{lp.label}_i")
    outer = For(vo, 0, n // t.factor, 1, (inner,), f"{lp.label}_o")
    return p.with_body(_rewrite_loop(p.body, t.loop, lambda _: [outer]))


# --------------------------------------------------------------------------
# outlining


def _loop_shape(lp: For):
    """Skeleton of a top-level loop with affine literal slots split into (coeff, const)."""
    if not all(isinstance(s, Assign) and s.guard is None for s in lp.body) or isyms(lp.start) or isyms(lp.stop):
        return None
    skeleton, consts = [], []
    for s in lp.body:
        slots = _slots(s)
        coeffs = []
        for _, v in slots:
            aff = iaffine(v)
            if aff is None or set(aff) - {None, lp.var}:
                return None
            coeffs.append(aff.get(lp.var, 0))
            consts.append(aff[None])
        skeleton.append((_fill(s, [Sym(f"@{k}") for k in range(len(slots))]), tuple(coeffs)))
    return (lp.start, lp.stop, lp.step, tuple(skeleton)), consts


def outline_groups(p: Program) -> list[tuple[str, ...]]:
    shapes: dict = {}
    for s in p.body:
        if isinstance(s, For):
            sh = _loop_shape(s)
            if sh is not None:
                shapes.setdefault(sh[0], []).append(s.label)
    return [tuple(v) for v in shapes.values() if len(v) >= 2]


def _outline(p: Program, t: Outline) -> Program:
    members = [s for s in p.body if isinstance(s, For) and s.label in t.group]
    if len(members) != len(t.group) or len(members) < 2:
        raise IllegalTransform("outline group must name at least two top-level loops")
    shapes = [_loop_shape(m) for m in members]
    if any(sh is None for sh in shapes) or len({sh[0] for sh in shapes}) != 1:
        raise IllegalTransform("outline group is not isomorphic")
    taken = _names(p)
    cols = list(zip(*[sh[1] for sh in shapes]))
    varying = [k for k, col in enumerate(cols) if len(set(col)) > 1]
    params = [_fresh(f"p{n}", taken) for n in range(len(varying))]
    first = members[0]
    var = Sym(first.var)
    fname = _fresh(f"{p.name}_part", taken)

    body = []
    slot = 0
    for stmt, coeffs in shapes[0][0][3]:
        values = []
        for c in coeffs:
            const = Sym(params[varying.index(slot)]) if slot in varying else cols[slot][0]
            values.append(iop("+", iop("*", c, var), const))
            slot += 1
        body.append(_fill(stmt, values))
    helper = FuncDef(fname, tuple(params), (replace(first, body=tuple(body)),))
    calls = {m.label: CallStmt(fname, tuple(shapes[n][1][k] for k in varying)) for n, m in enumerate(members)}
    new_body = tuple(calls.get(s.label, s) if isinstance(s, For) else s for s in p.body)
    return replace(p, body=new_body, functions=p.functions + (helper,))


# --------------------------------------------------------------------------


_APPLY = {
    Interchange: _interchange, Pad: _pad, Fuse: _fuse, Perfectize: _perfectize,
    BranchEliminate: _branch_eliminate, StrengthReduce: _strength_reduce, Tile: _tile, Outline: _outline,
}


def apply_transform(s: Program, t: Transform) -> Program:
    """Apply ``t`` or raise :class:`IllegalTransform` with the reason."""
    fn = _APPLY.get(type(t))
    if fn is None:
        raise IllegalTransform(f"unknown transform {t}")
    out = fn(s, t)
    check_program(out)
    return out


def staticize_bounds(s: Program) -> Program:
    """Replace loop bounds that mention bound parameters by their maxima, predicating writes."""
    bound_names = {b.name for b in s.bounds}
    maxima = {b.name: b.maximum for b in s.bounds}

    def visit(body, loop_vars):
        out = []
        for st in body:
            if isinstance(st, For):
                free = (isyms(st.start) | isyms(st.stop)) - loop_vars
                unknown = free - bound_names
                if unknown:
                    raise BoundError(f"loop {st.label} bound uses {sorted(unknown)} without a declared maximum")
                inner = visit(st.body, loop_vars | {st.var})
                if free:
                    if isyms(st.start) & bound_names:
                        raise BoundError(f"loop {st.label} has a variable start")
                    names = sorted(free)
                    ranges = [range(maxima[n] + 1) for n in names]
                    stops = [ieval(st.stop, dict(zip(names, combo))) for combo in product(*ranges)]
                    v = Sym(st.var)
                    if st.step > 0:
                        new_stop, cond = max(stops), iop("<", v, st.stop)
                    else:
                        new_stop, cond = min(stops), iop(">", v, st.stop)
                    try:
                        inner = _add_guard(inner, cond)
                    except IllegalTransform as e:
                        raise BoundError(e.reason) from None
                    st = replace(st, stop=new_stop, body=inner)
                else:
                    st = replace(st, body=inner)
            elif isinstance(st, If):
                st = replace(st, body=visit(st.body, loop_vars))
            out.append(st)
        return tuple(out)

    functions = tuple(replace(f, body=visit(f.body, set(f.params))) for f in s.functions)
    return replace(s, body=visit(s.body, set()), functions=functions)


def has_variable_bounds(s: Program) -> bool:
    bound_names = {b.name for b in s.bounds}
    all_loops = list(loops(s.body)) + [lp for f in s.functions for lp in loops(f.body)]
    return any((isyms(lp.start) | isyms(lp.stop)) & bound_names for lp in all_loops)


def has_branches(s: Program) -> bool:
    return any(isinstance(st, If) for st in walk_stmts(s.body)) or any(
        isinstance(st, If) for f in s.functions for st in walk_stmts(f.body))
