"""Typed IR shared by every stage of the toolchain.

Two expression layers exist.  Compile-time integer expressions (``IExpr``:
plain ``int``, :class:`Sym`, :class:`IOp`) describe array indices, shift
amounts, loop bounds and write guards; they only ever mention loop variables
and declared bound parameters, never runtime data.  Runtime expressions
(:class:`Const`, :class:`Var`, :class:`Load`, ...) carry an explicit bit width
and wrap modulo ``2**width``.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Union

WIDTHS = (1, 8, 32, 64, 128)
COMMUTATIVE = frozenset({"add", "mul", "and", "or", "xor"})
BINARY_OPS = ("add", "sub", "mul", "and", "or", "xor")
BUILTINS = ("addcarry", "subborrow", "mulwide", "cmovznz")


class IRError(Exception):
    """Raised for malformed programs (syntax, typing, scoping)."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "") + ": "
        super().__init__(where + message)


def mask(width: int) -> int:
    return (1 << width) - 1


def type_name(width: int) -> str:
    return f"u{width}"


# --------------------------------------------------------------------------
# compile-time integer expressions


@dataclass(frozen=True)
class Sym:
    """A loop variable, outlined-function parameter or bound parameter."""

    name: str


@dataclass(frozen=True)
class IOp:
    op: str
    args: tuple


IExpr = Union[int, Sym, IOp]


def _floordiv(a: int, b: int) -> int:
    return a // b


_IFUNCS: dict[str, Callable[..., int]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": _floordiv,
    "%": operator.mod,
    "&": operator.and_,
    "|": operator.or_,
    "^": operator.xor,
    "<<": operator.lshift,
    ">>": operator.rshift,
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "&&": lambda a, b: int(bool(a) and bool(b)),
    "neg": operator.neg,
    "~": operator.invert,
    "?:": lambda c, a, b: a if c else b,
}
COMPARISONS = frozenset({"<", "<=", ">", ">=", "==", "!="})


def is_iexpr(x) -> bool:
    return isinstance(x, (int, Sym, IOp)) and not isinstance(x, bool)


def ieval(e: IExpr, env: dict[str, int]) -> int:
    if isinstance(e, int):
        return e
    if isinstance(e, Sym):
        try:
            return env[e.name]
        except KeyError:
            raise IRError(f"unbound compile-time symbol {e.name}") from None
    return _IFUNCS[e.op](*(ieval(a, env) for a in e.args))


def isyms(e: IExpr) -> set[str]:
    if isinstance(e, int):
        return set()
    if isinstance(e, Sym):
        return {e.name}
    out: set[str] = set()
    for a in e.args:
        out |= isyms(a)
    return out


def iop(op: str, *args: IExpr) -> IExpr:
    """Build an IOp, folding constants and the obvious identities."""
    if all(isinstance(a, int) for a in args):
        return _IFUNCS[op](*args)
    if len(args) == 2:
        a, b = args
        if op == "+":
            if a == 0:
                return b
            if b == 0:
                return a
        elif op == "-" and b == 0:
            return a
        elif op == "*":
            if a == 0 or b == 0:
                return 0
            if a == 1:
                return b
            if b == 1:
                return a
        elif op in ("<<", ">>") and b == 0:
            return a
    return IOp(op, tuple(args))


def isubst(e: IExpr, mapping: dict[str, IExpr]) -> IExpr:
    if isinstance(e, int):
        return e
    if isinstance(e, Sym):
        return mapping.get(e.name, e)
    return iop(e.op, *(isubst(a, mapping) for a in e.args))


def iaffine(e: IExpr) -> dict[str | None, int] | None:
    """Decompose into ``{sym: coeff, None: const}``; ``None`` if not affine."""
    if isinstance(e, int):
        return {None: e}
    if isinstance(e, Sym):
        return {None: 0, e.name: 1}
    if e.op in ("+", "-") and len(e.args) == 2:
        a, b = iaffine(e.args[0]), iaffine(e.args[1])
        if a is None or b is None:
            return None
        sign = 1 if e.op == "+" else -1
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, 0) + sign * v
        return out
    if e.op == "neg":
        a = iaffine(e.args[0])
        return None if a is None else {k: -v for k, v in a.items()}
    if e.op == "*":
        a, b = iaffine(e.args[0]), iaffine(e.args[1])
        if a is None or b is None:
            return None
        if set(a) == {None}:
            a, b = b, a
        if set(b) != {None}:
            return None
        return {k: v * b[None] for k, v in a.items()}
    return None


def affine_expr(const: int, terms: list[tuple[int, str]]) -> IExpr:
    """Inverse of :func:`iaffine` for a readable canonical form."""
    out: IExpr = 0
    for coeff, name in terms:
        if coeff == 0:
            continue
        term = iop("*", coeff, Sym(name)) if coeff not in (1, -1) else Sym(name)
        if coeff == -1:
            out = iop("-", out, term) if out != 0 else iop("neg", term)
        else:
            out = iop("+", out, term)
    if const:
        if out == 0:
            return const
        out = iop("+", out, const) if const > 0 else iop("-", out, -const)
    return out


# --------------------------------------------------------------------------
# runtime expressions


@dataclass(frozen=True)
class Const:
    value: IExpr
    width: int


@dataclass(frozen=True)
class Var:
    name: str
    width: int


@dataclass(frozen=True)
class Load:
    array: str
    index: IExpr
    width: int


@dataclass(frozen=True)
class Unary:
    op: str  # not | trunc | zext
    arg: "Expr"
    width: int


@dataclass(frozen=True)
class Binary:
    op: str
    a: "Expr"
    b: "Expr"
    width: int


@dataclass(frozen=True)
class Shift:
    op: str  # shl | shr
    arg: "Expr"
    amount: IExpr
    width: int


@dataclass(frozen=True)
class Builtin:
    name: str
    width: int
    args: tuple

    @property
    def result_widths(self) -> tuple[int, ...]:
        if self.name in ("addcarry", "subborrow"):
            return (self.width, 1)
        if self.name == "mulwide":
            return (self.width, self.width)
        return (self.width,)


@dataclass(frozen=True)
class Extern:
    """Call to a non-builtin function; only kept so validation can report it."""

    name: str
    args: tuple
    width: int


Expr = Union[Const, Var, Load, Unary, Binary, Shift, Builtin, Extern]


def children(e: Expr) -> tuple:
    if isinstance(e, (Unary, Shift)):
        return (e.arg,)
    if isinstance(e, Binary):
        return (e.a, e.b)
    if isinstance(e, (Builtin, Extern)):
        return e.args
    return ()


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from walk_expr(c)


def map_iexprs(e: Expr, fn: Callable[[IExpr], IExpr]) -> Expr:
    """Rebuild ``e`` applying ``fn`` to every embedded compile-time expression."""
    if isinstance(e, Const):
        return Const(fn(e.value), e.width)
    if isinstance(e, Load):
        return Load(e.array, fn(e.index), e.width)
    if isinstance(e, Var):
        return e
    if isinstance(e, Unary):
        return Unary(e.op, map_iexprs(e.arg, fn), e.width)
    if isinstance(e, Binary):
        return Binary(e.op, map_iexprs(e.a, fn), map_iexprs(e.b, fn), e.width)
    if isinstance(e, Shift):
        return Shift(e.op, map_iexprs(e.arg, fn), fn(e.amount), e.width)
    if isinstance(e, Builtin):
        return Builtin(e.name, e.width, tuple(map_iexprs(a, fn) for a in e.args))
    if isinstance(e, Extern):
        return Extern(e.name, tuple(map_iexprs(a, fn) for a in e.args), e.width)
    raise TypeError(e)


# --------------------------------------------------------------------------
# statements


@dataclass(frozen=True)
class LocalRef:
    name: str


@dataclass(frozen=True)
class ElemRef:
    array: str
    index: IExpr


Target = Union[LocalRef, ElemRef]


@dataclass(frozen=True)
class Assign:
    """One- or two-target assignment.

    ``guard`` is a compile-time predicate: when it evaluates to zero the
    statement instance has no effect.  It is emitted as a ``cmovznz`` select,
    never as a branch.
    """

    targets: tuple
    rhs: Expr
    guard: IExpr | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class For:
    var: str
    start: IExpr
    stop: IExpr
    step: int
    body: tuple
    label: str = ""
    line: int = field(default=0, compare=False)

    def bounds(self, env: dict[str, int] | None = None) -> tuple[int, int]:
        env = env or {}
        return ieval(self.start, env), ieval(self.stop, env)

    def trip_count(self, env: dict[str, int] | None = None) -> int:
        start, stop = self.bounds(env)
        if self.step > 0:
            return max(0, -(-(stop - start) // self.step))
        return max(0, -(-(start - stop) // -self.step))

    def values(self, env: dict[str, int] | None = None) -> range:
        start, _ = self.bounds(env)
        n = self.trip_count(env)
        return range(start, start + n * self.step, self.step)


@dataclass(frozen=True)
class If:
    cond: Expr
    body: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CallStmt:
    func: str
    args: tuple
    line: int = field(default=0, compare=False)


Stmt = Union[Assign, For, If, CallStmt]


@dataclass(frozen=True)
class FuncDef:
    """Outlined body shared by several call sites; parameters are compile-time ints."""

    name: str
    params: tuple
    body: tuple


@dataclass(frozen=True)
class Param:
    name: str
    direction: str  # "in" | "out"
    width: int
    length: int


@dataclass(frozen=True)
class Local:
    name: str
    width: int
    length: int | None = None  # None for scalars

    @property
    def is_array(self) -> bool:
        return self.length is not None


@dataclass(frozen=True)
class Bound:
    """Scalar loop-bound parameter with a declared compile-time maximum."""

    name: str
    maximum: int


@dataclass(frozen=True)
class Program:
    """A kernel.  Straight-line when ``body`` holds only :class:`Assign`."""

    name: str
    params: tuple
    locals: tuple
    body: tuple
    functions: tuple = ()
    bounds: tuple = ()

    def param(self, name: str) -> Param | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def local(self, name: str) -> Local | None:
        for loc in self.locals:
            if loc.name == name:
                return loc
        return None

    def function(self, name: str) -> FuncDef | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def arrays(self) -> dict[str, tuple[int, int]]:
        """name -> (width, length) for parameter and local arrays."""
        out = {p.name: (p.width, p.length) for p in self.params}
        for loc in self.locals:
            if loc.is_array:
                out[loc.name] = (loc.width, loc.length)
        return out

    def scalar_width(self, name: str) -> int:
        loc = self.local(name)
        if loc is None or loc.is_array:
            raise IRError(f"unknown local {name}")
        return loc.width

    def target_width(self, t: Target) -> int:
        if isinstance(t, LocalRef):
            return self.scalar_width(t.name)
        return self.arrays()[t.array][0]

    @property
    def signature(self) -> tuple:
        return tuple((p.name, p.direction, p.width, p.length) for p in self.params)

    @property
    def is_straight_line(self) -> bool:
        return not self.functions and all(isinstance(s, Assign) and s.guard is None for s in self.body)

    def with_body(self, body, **changes) -> "Program":
        return replace(self, body=tuple(body), **changes)


def walk_stmts(body) -> Iterator[Stmt]:
    """Pre-order walk over statements, descending into loops and ifs."""
    for s in body:
        yield s
        if isinstance(s, (For, If)):
            yield from walk_stmts(s.body)


def loops(body) -> Iterator[For]:
    for s in walk_stmts(body):
        if isinstance(s, For):
            yield s


def find_loop(body, label: str) -> For | None:
    for lp in loops(body):
        if lp.label == label:
            return lp
    return None


def subst_stmt(s: Stmt, mapping: dict[str, IExpr]) -> Stmt:
    """Substitute compile-time symbols throughout a statement."""
    fn = lambda e: isubst(e, mapping)  # noqa: E731
    if isinstance(s, Assign):
        targets = tuple(ElemRef(t.array, fn(t.index)) if isinstance(t, ElemRef) else t for t in s.targets)
        guard = None if s.guard is None else fn(s.guard)
        return Assign(targets, map_iexprs(s.rhs, fn), guard, s.line)
    if isinstance(s, For):
        inner = {k: v for k, v in mapping.items() if k != s.var}
        return For(s.var, fn(s.start), fn(s.stop), s.step,
                   tuple(subst_stmt(c, inner) for c in s.body), s.label, s.line)
    if isinstance(s, If):
        return If(map_iexprs(s.cond, fn), tuple(subst_stmt(c, mapping) for c in s.body), s.line)
    if isinstance(s, CallStmt):
        return CallStmt(s.func, tuple(fn(a) for a in s.args), s.line)
    raise TypeError(s)


def stmt_reads(s: Assign) -> list:
    """Var/Load leaves read by an assignment, in pre-order."""
    return [e for e in walk_expr(s.rhs) if isinstance(e, (Var, Load))]


def op_count(body) -> int:
    n = 0
    for s in walk_stmts(body):
        if isinstance(s, Assign):
            n += sum(1 for e in walk_expr(s.rhs) if isinstance(e, (Binary, Shift, Builtin, Unary)))
    return n


def label_loops(p: Program) -> Program:
    """Give every unlabeled loop a fresh ``L<k>`` label; raise on duplicate labels."""
    taken = [lp.label for lp in loops(p.body) if lp.label]
    for f in p.functions:
        taken += [lp.label for lp in loops(f.body) if lp.label]
    if len(taken) != len(set(taken)):
        raise IRError("duplicate loop label")
    used = set(taken)
    counter = 0

    def fresh() -> str:
        nonlocal counter
        while f"L{counter}" in used:
            counter += 1
        used.add(f"L{counter}")
        return f"L{counter}"

    def visit(body):
        out = []
        for s in body:
            if isinstance(s, For):
                s = replace(s, body=visit(s.body), label=s.label or fresh())
            elif isinstance(s, If):
                s = replace(s, body=visit(s.body))
            out.append(s)
        return tuple(out)

    functions = tuple(replace(f, body=visit(f.body)) for f in p.functions)
    return replace(p, body=visit(p.body), functions=functions)
