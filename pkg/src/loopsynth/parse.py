"""Reader for the ``.slc`` C subset and the JSON form of the IR.

Grammar summary (one kernel per file, optional outlined helpers before it)::

    kernel  := 'void' NAME '(' param {',' param} ')' '{' stmt* '}'
    param   := ['const'] TYPE NAME '[' INT ']'      array parameter
             | 'int' NAME '<=' INT                   loop-bound parameter
    helper  := 'static' 'void' NAME '(' (TYPE NAME '[' INT ']' | 'int' NAME) ... ')' '{' stmt* '}'
    stmt    := TYPE NAME ['=' expr] ';' | TYPE NAME '[' INT ']' ';'
             | lvalue '=' expr ';'
             | '(' [TYPE] lvalue ',' [TYPE] lvalue ')' '=' BUILTIN '(' args ')' ';'
             | [LABEL ':'] 'for' '(' ... ')' '{' stmt* '}'
             | 'if' '(' expr ')' '{' stmt* '}'
             | NAME '(' args ')' ';'

Types are ``u1 u8 u32 u64 u128``; builtins are ``addcarry_uW``,
``subborrow_uW``, ``mulwide_uW`` and ``cmovznz_uW``.  Lines starting with
``#`` (directives) are skipped.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .ir import (
    BUILTINS, Assign, Binary, Bound, Builtin, CallStmt, Const, ElemRef, Extern,
    For, FuncDef, If, IRError, Load, Local, LocalRef, Param, Program, Shift, Sym, Unary,
    Var, WIDTHS, iop, is_iexpr, label_loops, mask,
)
from .validate import check_program

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<directive>\#[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F]+[uUlL]*|[0-9]+[uUlL]*)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><<|>>|<=|>=|==|!=|&&|\+=|-=|\+\+|--|[-+*/%&|^~<>=()\[\]{},;:?])
    """,
    re.VERBOSE | re.DOTALL,
)
_TYPE_RE = re.compile(r"u(1|8|32|64|128)$")
_BUILTIN_RE = re.compile(r"(addcarry|subborrow|mulwide|cmovznz)_u(\d+)$")
_BINOPS = {"+": "add", "-": "sub", "*": "mul", "&": "and", "|": "or", "^": "xor"}
# C precedence, loosest first
_LEVELS = [("&&",), ("|",), ("^",), ("&",), ("==", "!="), ("<", "<=", ">", ">="), ("<<", ">>"),
           ("+", "-"), ("*", "/", "%")]


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise IRError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = pos + text.rfind("\n") + 1
        elif kind not in ("ws", "directive"):
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _width_of(name: str) -> int | None:
    m = _TYPE_RE.match(name)
    return int(m.group(1)) if m else None


class _Scope:
    def __init__(self):
        self.arrays: dict[str, tuple[int, int]] = {}
        self.const_arrays: set[str] = set()
        self.written_arrays: set[str] = set()
        self.locals: dict[str, int] = {}
        self.local_order: list[Local] = []
        self.assigned: set[str] = set()
        self.syms: set[str] = set()  # bounds and helper int params
        self.loop_vars: list[str] = []
        self.functions: dict[str, FuncDef] = {}
        self.helper_arrays: dict[str, dict[str, tuple[int, int]]] = {}


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self.scope = _Scope()

    # -- token helpers -----------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "name") and t.text == text

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None) -> IRError:
        tok = tok or self.peek()
        return IRError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            t = self.peek()
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def name(self) -> Token:
        t = self.next()
        if t.kind != "name":
            raise self.error(f"expected identifier, found {t.text!r}", t)
        return t

    def int_literal(self) -> int:
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        t = self.next()
        if t.kind != "num":
            raise self.error(f"expected integer literal, found {t.text!r}", t)
        v = _parse_num(t.text)
        return -v if neg else v

    def type_width(self) -> int:
        t = self.name()
        w = _width_of(t.text)
        if w is None:
            raise self.error(f"unknown type {t.text}", t)
        return w

    def at_type(self, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == "name" and _width_of(t.text) is not None

    # -- top level ---------------------------------------------------------
    def parse_file(self) -> Program:
        while self.at("static"):
            self.parse_helper()
        prog = self.parse_kernel()
        if self.peek().kind != "eof":
            raise self.error("trailing input after kernel function")
        return prog

    def parse_helper(self) -> None:
        self.expect("static")
        self.expect("void")
        name = self.name().text
        outer = self.scope
        self.scope = _Scope()
        self.scope.functions = outer.functions
        params: list[str] = []
        arrays: dict[str, tuple[int, int]] = {}
        self.expect("(")
        while not self.at(")"):
            if self.at("const"):
                self.next()
            if self.at("int"):
                self.next()
                p = self.name().text
                params.append(p)
                self.scope.syms.add(p)
            else:
                w = self.type_width()
                arr = self.name().text
                self.expect("[")
                n = self.int_literal()
                self.expect("]")
                arrays[arr] = (w, n)
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        self.scope.arrays = dict(arrays)
        body = self.block()
        if self.scope.locals:
            raise self.error(f"helper {name} may not declare locals")
        self.scope = outer
        self.scope.functions[name] = FuncDef(name, tuple(params), tuple(body))
        self.scope.helper_arrays[name] = arrays

    def parse_kernel(self) -> Program:
        self.expect("void")
        name = self.name().text
        self.expect("(")
        raw_params: list[tuple[str, int, int, bool]] = []
        bounds: list[Bound] = []
        while not self.at(")"):
            const = False
            if self.at("const"):
                self.next()
                const = True
            if self.at("int"):
                self.next()
                b = self.name().text
                self.expect("<=")
                bounds.append(Bound(b, self.int_literal()))
                self.scope.syms.add(b)
            else:
                w = self.type_width()
                tok = self.name()
                self.expect("[")
                n = self.int_literal()
                if n <= 0:
                    raise self.error(f"array {tok.text} must have positive length", tok)
                self.expect("]")
                if tok.text in self.scope.arrays:
                    raise self.error(f"duplicate parameter {tok.text}", tok)
                self.scope.arrays[tok.text] = (w, n)
                if const:
                    self.scope.const_arrays.add(tok.text)
                raw_params.append((tok.text, w, n, const))
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        param_names = {p[0] for p in raw_params}
        for fname, arrays in self.scope.helper_arrays.items():
            for arr, shape in arrays.items():
                if arr in param_names and self.scope.arrays[arr] != shape:
                    raise self.error(f"helper {fname} declares {arr} with a different shape")
        body = self.block()
        for fname, arrays in self.scope.helper_arrays.items():
            for arr, shape in arrays.items():
                if self.scope.arrays.get(arr) != shape:
                    raise self.error(f"helper {fname} array {arr} does not match the kernel")
        # helper bodies write kernel arrays by name
        for f in self.scope.functions.values():
            for s in _assigns(f.body):
                for t in s.targets:
                    if isinstance(t, ElemRef):
                        self.scope.written_arrays.add(t.array)
        params = []
        for pname, w, n, const in raw_params:
            if const and pname in self.scope.written_arrays:
                raise IRError(f"write to const array {pname}")
            direction = "out" if pname in self.scope.written_arrays else "in"
            params.append(Param(pname, direction, w, n))
        prog = Program(name, tuple(params), tuple(self.scope.local_order), tuple(body),
                       tuple(self.scope.functions.values()), tuple(bounds))
        prog = label_loops(prog)
        check_program(prog)
        return prog

    # -- statements --------------------------------------------------------
    def block(self) -> list:
        self.expect("{")
        out = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise self.error("unterminated block")
            s = self.statement()
            if s is not None:
                out.append(s)
        self.expect("}")
        return out

    def statement(self):
        t = self.peek()
        if self.at(";"):
            self.next()
            return None
        if t.kind == "name" and self.at(":", 1):
            label = self.next().text
            self.next()
            if not self.at("for"):
                raise self.error("labels are only allowed on for loops")
            return self.for_loop(label)
        if self.at("for"):
            return self.for_loop("")
        if self.at("if"):
            return self.if_stmt()
        if self.at("("):
            return self.tuple_assign()
        if self.at_type():
            return self.declaration()
        if t.kind == "name" and self.at("(", 1):
            return self.call_stmt()
        return self.assignment()

    def declaration(self):
        w = self.type_width()
        tok = self.name()
        if tok.text in self.scope.locals or tok.text in self.scope.arrays:
            raise self.error(f"reassignment of {tok.text}", tok)
        if self.at("["):
            self.next()
            n = self.int_literal()
            self.expect("]")
            self.expect(";")
            if n <= 0:
                raise self.error(f"array {tok.text} must have positive length", tok)
            self.scope.arrays[tok.text] = (w, n)
            self.scope.local_order.append(Local(tok.text, w, n))
            return None
        self.scope.locals[tok.text] = w
        self.scope.local_order.append(Local(tok.text, w))
        if self.at(";"):
            self.next()
            return None
        self.expect("=")
        return self._finish_assign([(LocalRef(tok.text), tok)], tok)

    def assignment(self):
        tok = self.peek()
        target = self.lvalue()
        self.expect("=")
        return self._finish_assign([(target, tok)], tok)

    def _finish_assign(self, targets, tok):
        widths = [self._target_width(t, ttok) for t, ttok in targets]
        rhs = self.expr()
        self.expect(";")
        guard = None
        if len(targets) == 1:
            rhs = self.coerce(rhs, widths[0], tok)
            if isinstance(rhs, Builtin) and rhs.name != "cmovznz":
                raise self.error(f"{rhs.name} returns two results; use a tuple assignment", tok)
            if rhs.width != widths[0]:
                raise self.error(f"width mismatch: u{rhs.width} assigned to u{widths[0]}", tok)
            rhs, guard = _split_guard(targets[0][0], rhs)
        else:
            if not isinstance(rhs, Builtin) or len(rhs.result_widths) != 2:
                raise self.error("tuple assignment requires a two-result builtin", tok)
            if tuple(widths) != rhs.result_widths:
                raise self.error(
                    f"width mismatch: targets {tuple('u%d' % w for w in widths)} for {rhs.name}_u{rhs.width}", tok)
        for t, ttok in targets:
            self._record_write(t, ttok)
        return Assign(tuple(t for t, _ in targets), rhs, guard, tok.line)

    def tuple_assign(self):
        tok = self.expect("(")
        targets = []
        for k in range(2):
            if self.at_type():
                w = self.type_width()
                ntok = self.name()
                if ntok.text in self.scope.locals or ntok.text in self.scope.arrays:
                    raise self.error(f"reassignment of {ntok.text}", ntok)
                self.scope.locals[ntok.text] = w
                self.scope.local_order.append(Local(ntok.text, w))
                targets.append((LocalRef(ntok.text), ntok))
            else:
                ntok = self.peek()
                targets.append((self.lvalue(), ntok))
            if k == 0:
                self.expect(",")
        self.expect(")")
        self.expect("=")
        if targets[0][0] == targets[1][0]:
            raise self.error("both tuple targets name the same location", tok)
        return self._finish_assign(targets, tok)

    def lvalue(self):
        tok = self.name()
        if tok.text in self.scope.loop_vars:
            raise self.error(f"loop variable {tok.text} is written", tok)
        if self.at("["):
            self.next()
            idx = self.expr()
            self.expect("]")
            return ElemRef(tok.text, self.index(tok, idx))
        if tok.text in self.scope.arrays:
            raise self.error(f"array {tok.text} assigned without an index", tok)
        return LocalRef(tok.text)

    def _target_width(self, t, tok) -> int:
        if isinstance(t, LocalRef):
            if t.name not in self.scope.locals:
                raise self.error(f"undeclared identifier {t.name}", tok)
            return self.scope.locals[t.name]
        return self.scope.arrays[t.array][0]

    def _record_write(self, t, tok):
        if isinstance(t, LocalRef):
            if t.name in self.scope.assigned:
                raise self.error(f"reassignment of {t.name}", tok)
            if self.scope.loop_vars:
                raise self.error(f"local {t.name} assigned inside a loop", tok)
            self.scope.assigned.add(t.name)
        else:
            if t.array in self.scope.const_arrays:
                raise self.error(f"write to const array {t.array}", tok)
            self.scope.written_arrays.add(t.array)

    def for_loop(self, label: str):
        tok = self.expect("for")
        self.expect("(")
        if self.at("int"):
            self.next()
        vtok = self.name()
        var = vtok.text
        if var in self.scope.locals or var in self.scope.arrays or var in self.scope.loop_vars:
            raise self.error(f"loop variable {var} shadows another name", vtok)
        self.expect("=")
        start = self.const_expr()
        self.expect(";")
        if self.name().text != var:
            raise self.error("loop condition must test the loop variable")
        cmp = self.next().text
        if cmp not in ("<", "<=", ">", ">=", "!="):
            raise self.error(f"unsupported loop comparison {cmp}")
        stop = self.const_expr()
        self.expect(";")
        step = self.loop_step(var)
        self.expect(")")
        if cmp == "<=":
            stop = iop("+", stop, 1)
        elif cmp == ">=":
            stop = iop("-", stop, 1)
        if step == 0:
            raise self.error("loop step must be nonzero", tok)
        if (cmp in ("<", "<=") and step < 0) or (cmp in (">", ">=") and step > 0):
            raise self.error("loop step direction does not match its condition", tok)
        self.scope.loop_vars.append(var)
        body = self.block()
        self.scope.loop_vars.pop()
        return For(var, start, stop, step, tuple(body), label, tok.line)

    def loop_step(self, var: str) -> int:
        if self.at("++") or self.at("--"):
            sign = 1 if self.next().text == "++" else -1
            if self.name().text != var:
                raise self.error("loop increment must update the loop variable")
            return sign
        if self.name().text != var:
            raise self.error("loop increment must update the loop variable")
        t = self.next().text
        if t in ("++", "--"):
            return 1 if t == "++" else -1
        if t in ("+=", "-="):
            n = self.int_literal()
            return n if t == "+=" else -n
        if t == "=":
            if self.name().text != var:
                raise self.error("loop increment must update the loop variable")
            op = self.next().text
            n = self.int_literal()
            if op not in ("+", "-"):
                raise self.error("unsupported loop increment")
            return n if op == "+" else -n
        raise self.error("unsupported loop increment")

    def if_stmt(self):
        tok = self.expect("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        if is_iexpr(cond):
            raise self.error("if condition must be a runtime value", tok)
        return If(cond, tuple(self.block()), tok.line)

    def call_stmt(self):
        tok = self.name()
        self.expect("(")
        args = []
        while not self.at(")"):
            if self.peek().kind == "name" and self.peek().text in self.scope.arrays and not self.at("[", 1):
                self.next()  # array pass-through, arrays are bound by name
            else:
                args.append(self.const_expr())
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        self.expect(";")
        f = self.scope.functions.get(tok.text)
        if f is None:
            raise self.error(f"call to undefined function {tok.text}", tok)
        if len(args) != len(f.params):
            raise self.error(f"{tok.text} expects {len(f.params)} int arguments", tok)
        return CallStmt(tok.text, tuple(args), tok.line)

    # -- expressions -------------------------------------------------------
    def const_expr(self):
        tok = self.peek()
        e = self.expr()
        if not is_iexpr(e):
            raise self.error("expected a compile-time integer expression", tok)
        return e

    def index(self, tok, idx):
        if not is_iexpr(idx):
            raise self.error(f"non-constant array index on {tok.text}", tok)
        if tok.text not in self.scope.arrays:
            raise self.error(f"undeclared array {tok.text}", tok)
        n = self.scope.arrays[tok.text][1]
        if isinstance(idx, int) and not 0 <= idx < n:
            raise self.error(f"index {idx} out of bounds for {tok.text}[{n}]", tok)
        return idx

    def expr(self):
        cond = self.binary(0)
        if self.at("?"):
            tok = self.next()
            a = self.expr()
            self.expect(":")
            b = self.expr()
            if not (is_iexpr(cond) and is_iexpr(a) and is_iexpr(b)):
                raise self.error("conditional expressions are compile-time only", tok)
            return iop("?:", cond, a, b)
        return cond

    def binary(self, level: int):
        if level == len(_LEVELS):
            return self.unary()
        lhs = self.binary(level + 1)
        while self.peek().kind == "op" and self.peek().text in _LEVELS[level]:
            tok = self.next()
            rhs = self.binary(level + 1)
            lhs = self.combine(tok, lhs, rhs)
        return lhs

    def combine(self, tok, a, b):
        op = tok.text
        if is_iexpr(a) and is_iexpr(b):
            return iop(op, a, b)
        if op in ("<<", ">>"):
            if not is_iexpr(b):
                raise self.error("shift amount must be a compile-time constant", tok)
            if is_iexpr(a):
                raise self.error("cannot infer width of shifted constant; add a cast", tok)
            if isinstance(b, int) and not 0 <= b < a.width:
                raise self.error(f"shift amount {b} out of range for u{a.width}", tok)
            return Shift("shl" if op == "<<" else "shr", a, b, a.width)
        if op not in _BINOPS:
            raise self.error(f"operator {op} is not supported on runtime values", tok)
        w = b.width if is_iexpr(a) else a.width
        a = self.coerce(a, w, tok)
        b = self.coerce(b, w, tok)
        if a.width != b.width:
            raise self.error(f"width mismatch: u{a.width} {op} u{b.width}", tok)
        return Binary(_BINOPS[op], a, b, w)

    def coerce(self, v, width: int, tok):
        if is_iexpr(v):
            if isinstance(v, int) and not 0 <= v <= mask(width):
                raise self.error(f"constant {v} does not fit in u{width}", tok)
            return Const(v, width)
        return v

    def unary(self):
        tok = self.peek()
        if self.at("~"):
            self.next()
            v = self.unary()
            return iop("~", v) if is_iexpr(v) else Unary("not", v, v.width)
        if self.at("-"):
            self.next()
            v = self.unary()
            if not is_iexpr(v):
                raise self.error("unary minus on runtime values is not supported", tok)
            return iop("neg", v)
        if self.at("(") and self.at_type(1) and self.at(")", 2):
            self.next()
            w = self.type_width()
            self.next()
            v = self.unary()
            if is_iexpr(v):
                return self.coerce(v, w, tok)
            if v.width == w:
                return v
            return Unary("zext" if w > v.width else "trunc", v, w)
        return self.primary()

    def primary(self):
        tok = self.next()
        if tok.kind == "num":
            return _parse_num(tok.text)
        if tok.text == "(":
            v = self.expr()
            self.expect(")")
            return v
        if tok.kind != "name":
            raise self.error(f"unexpected {tok.text or 'end of input'!r}", tok)
        name = tok.text
        if self.at("("):
            return self.call_expr(tok)
        if self.at("["):
            self.next()
            idx = self.expr()
            self.expect("]")
            idx = self.index(tok, idx)
            return Load(name, idx, self.scope.arrays[name][0])
        if name in self.scope.loop_vars or name in self.scope.syms:
            return Sym(name)
        if name in self.scope.locals:
            if name not in self.scope.assigned:
                raise self.error(f"use of {name} before assignment", tok)
            return Var(name, self.scope.locals[name])
        if name in self.scope.arrays:
            raise self.error(f"array {name} used without an index", tok)
        raise self.error(f"undeclared identifier {name}", tok)

    def call_expr(self, tok):
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.expr())
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        m = _BUILTIN_RE.match(tok.text)
        if m is None:
            runtime = [a for a in args if not is_iexpr(a)]
            w = runtime[0].width if runtime else 64
            return Extern(tok.text, tuple(self.coerce(a, w, tok) for a in args), w)
        name, w = m.group(1), int(m.group(2))
        if w not in WIDTHS or w == 1:
            raise self.error(f"unsupported builtin width u{w}", tok)
        arity = 2 if name == "mulwide" else 3
        if len(args) != arity:
            raise self.error(f"{tok.text} takes {arity} arguments", tok)
        if name in ("addcarry", "subborrow"):
            widths = (1, w, w)
        elif name == "mulwide":
            widths = (w, w)
        else:
            flag = args[0]
            widths = (flag.width if not is_iexpr(flag) else None, w, w)
        typed = []
        for a, aw in zip(args, widths):
            if aw is None:
                typed.append(a)  # compile-time flag of a guarded write
                continue
            a = self.coerce(a, aw, tok)
            if a.width != aw:
                raise self.error(f"width mismatch: {tok.text} expects u{aw} argument, got u{a.width}", tok)
            typed.append(a)
        return Builtin(name, w, tuple(typed))


def _parse_num(text: str) -> int:
    return int(text.rstrip("uUlL"), 0)


def _split_guard(target, rhs):
    """Recognize ``X = cmovznz(g, X, e)`` with compile-time ``g`` as a guarded write."""
    if isinstance(rhs, Builtin) and rhs.name == "cmovznz":
        flag, old, new = rhs.args
        if is_iexpr(flag):
            if _reads_target(old, target):
                return new, flag
            raise IRError("cmovznz with a compile-time flag must reselect its own target")
    return rhs, None


def _reads_target(e, target) -> bool:
    if isinstance(target, LocalRef):
        return isinstance(e, Var) and e.name == target.name
    return isinstance(e, Load) and e.array == target.array and e.index == target.index


def _assigns(body):
    for s in body:
        if isinstance(s, Assign):
            yield s
        elif isinstance(s, (For, If)):
            yield from _assigns(s.body)


def parse_program(source: str) -> Program:
    """Parse and validate ``.slc`` source into a :class:`Program`."""
    return Parser(source).parse_file()


# --------------------------------------------------------------------------
# JSON form

def _iexpr_to_json(e):
    if isinstance(e, int):
        return e
    if isinstance(e, Sym):
        return e.name
    return {"iop": e.op, "args": [_iexpr_to_json(a) for a in e.args]}


def _iexpr_from_json(d):
    if isinstance(d, bool):
        raise IRError("booleans are not integers")
    if isinstance(d, int):
        return d
    if isinstance(d, str):
        return Sym(d)
    return iop(d["iop"], *(_iexpr_from_json(a) for a in d["args"]))


def _expr_to_json(e):
    if isinstance(e, Const):
        return {"const": _iexpr_to_json(e.value), "type": f"u{e.width}"}
    if isinstance(e, Var):
        return {"var": e.name}
    if isinstance(e, Load):
        return {"load": e.array, "index": _iexpr_to_json(e.index)}
    if isinstance(e, Unary):
        d = {"op": e.op, "args": [_expr_to_json(e.arg)]}
        if e.op != "not":
            d["type"] = f"u{e.width}"
        return d
    if isinstance(e, Binary):
        return {"op": e.op, "args": [_expr_to_json(e.a), _expr_to_json(e.b)]}
    if isinstance(e, Shift):
        return {"op": e.op, "args": [_expr_to_json(e.arg)], "amount": _iexpr_to_json(e.amount)}
    if isinstance(e, Builtin):
        return {"builtin": e.name, "type": f"u{e.width}", "args": [
            _iexpr_to_json(a) if is_iexpr(a) else _expr_to_json(a) for a in e.args]}
    if isinstance(e, Extern):
        return {"call": e.name, "type": f"u{e.width}", "args": [_expr_to_json(a) for a in e.args]}
    raise TypeError(e)


def _target_to_json(t):
    if isinstance(t, LocalRef):
        return {"local": t.name}
    return {"array": t.array, "index": _iexpr_to_json(t.index)}


def _stmt_to_json(s):
    if isinstance(s, Assign):
        d = {"kind": "assign", "targets": [_target_to_json(t) for t in s.targets], "rhs": _expr_to_json(s.rhs)}
        if s.guard is not None:
            d["guard"] = _iexpr_to_json(s.guard)
        return d
    if isinstance(s, For):
        return {"kind": "for", "var": s.var, "start": _iexpr_to_json(s.start), "stop": _iexpr_to_json(s.stop),
                "step": s.step, "label": s.label, "body": [_stmt_to_json(c) for c in s.body]}
    if isinstance(s, If):
        return {"kind": "if", "cond": _expr_to_json(s.cond), "body": [_stmt_to_json(c) for c in s.body]}
    return {"kind": "call", "func": s.func, "args": [_iexpr_to_json(a) for a in s.args]}


def program_to_json(p: Program) -> dict:
    d = {
        "name": p.name,
        "params": [{"name": q.name, "dir": q.direction, "type": f"u{q.width}", "length": q.length} for q in p.params],
        "locals": [{"name": loc.name, "type": f"u{loc.width}", **({"length": loc.length} if loc.is_array else {})}
                   for loc in p.locals],
        "body": [_stmt_to_json(s) for s in p.body],
    }
    if p.functions:
        d["functions"] = [{"name": f.name, "params": list(f.params), "body": [_stmt_to_json(s) for s in f.body]}
                          for f in p.functions]
    if p.bounds:
        d["bounds"] = [{"name": b.name, "max": b.maximum} for b in p.bounds]
    return d


class _JsonReader:
    def __init__(self, arrays, locals_):
        self.arrays = arrays
        self.locals = locals_

    def width(self, t: str) -> int:
        w = _width_of(t)
        if w is None:
            raise IRError(f"unknown type {t}")
        return w

    def expr(self, d, want: int | None = None):
        if "const" in d:
            return Const(_iexpr_from_json(d["const"]), self.width(d["type"]) if "type" in d else want or 64)
        if "var" in d:
            if d["var"] not in self.locals:
                raise IRError(f"undeclared identifier {d['var']}")
            return Var(d["var"], self.locals[d["var"]])
        if "load" in d:
            if d["load"] not in self.arrays:
                raise IRError(f"undeclared array {d['load']}")
            return Load(d["load"], _iexpr_from_json(d["index"]), self.arrays[d["load"]][0])
        if "builtin" in d:
            w = self.width(d["type"])
            name = d["builtin"]
            if name not in BUILTINS:
                raise IRError(f"unknown builtin {name}")
            args = []
            for k, a in enumerate(d["args"]):
                if name == "cmovznz" and k == 0 and not isinstance(a, dict) or isinstance(a, dict) and "iop" in a:
                    args.append(_iexpr_from_json(a))
                else:
                    aw = 1 if name in ("addcarry", "subborrow") and k == 0 else w
                    args.append(self.expr(a, aw))
            return Builtin(name, w, tuple(args))
        if "call" in d:
            w = self.width(d["type"])
            return Extern(d["call"], tuple(self.expr(a, w) for a in d["args"]), w)
        op = d["op"]
        if op in ("not", "trunc", "zext"):
            arg = self.expr(d["args"][0], want)
            w = arg.width if op == "not" else self.width(d["type"])
            return Unary(op, arg, w)
        if op in ("shl", "shr"):
            arg = self.expr(d["args"][0], want)
            return Shift(op, arg, _iexpr_from_json(d["amount"]), arg.width)
        a_d, b_d = d["args"]
        # constants adopt the width of the other operand
        if "const" in a_d and "type" not in a_d:
            b = self.expr(b_d, want)
            a = self.expr(a_d, b.width)
        else:
            a = self.expr(a_d, want)
            b = self.expr(b_d, a.width)
        return Binary(op, a, b, a.width)

    def target(self, d):
        if "local" in d:
            return LocalRef(d["local"])
        return ElemRef(d["array"], _iexpr_from_json(d["index"]))

    def target_width(self, t) -> int:
        if isinstance(t, LocalRef):
            if t.name not in self.locals:
                raise IRError(f"undeclared identifier {t.name}")
            return self.locals[t.name]
        if t.array not in self.arrays:
            raise IRError(f"undeclared array {t.array}")
        return self.arrays[t.array][0]

    def stmt(self, d):
        kind = d.get("kind", "assign")
        if kind == "assign":
            targets = tuple(self.target(t) for t in d["targets"])
            rhs = self.expr(d["rhs"], self.target_width(targets[0]))
            guard = _iexpr_from_json(d["guard"]) if "guard" in d else None
            return Assign(targets, rhs, guard)
        if kind == "for":
            return For(d["var"], _iexpr_from_json(d["start"]), _iexpr_from_json(d["stop"]), int(d.get("step", 1)),
                       tuple(self.stmt(c) for c in d["body"]), d.get("label", ""))
        if kind == "if":
            return If(self.expr(d["cond"]), tuple(self.stmt(c) for c in d["body"]))
        if kind == "call":
            return CallStmt(d["func"], tuple(_iexpr_from_json(a) for a in d["args"]))
        raise IRError(f"unknown statement kind {kind}")


def program_from_json(d: dict) -> Program:
    """Build and validate a Program from its JSON form."""
    for key in ("name", "params", "locals", "body"):
        if key not in d:
            raise IRError(f"IR JSON is missing key {key!r}")
    params = []
    arrays = {}
    for q in d["params"]:
        w = _width_of(q["type"])
        if w is None:
            raise IRError(f"unknown type {q['type']}")
        params.append(Param(q["name"], q.get("dir", "in"), w, int(q["length"])))
        arrays[q["name"]] = (w, int(q["length"]))
    locals_ = []
    scalars = {}
    for loc in d["locals"]:
        w = _width_of(loc["type"])
        if w is None:
            raise IRError(f"unknown type {loc['type']}")
        length = loc.get("length")
        locals_.append(Local(loc["name"], w, None if length is None else int(length)))
        if length is None:
            scalars[loc["name"]] = w
        else:
            arrays[loc["name"]] = (w, int(length))
    reader = _JsonReader(arrays, scalars)
    body = tuple(reader.stmt(s) for s in d["body"])
    functions = tuple(FuncDef(f["name"], tuple(f["params"]), tuple(reader.stmt(s) for s in f["body"]))
                      for f in d.get("functions", []))
    bounds = tuple(Bound(b["name"], int(b["max"])) for b in d.get("bounds", []))
    prog = label_loops(Program(d["name"], tuple(params), tuple(locals_), body, functions, bounds))
    check_program(prog)
    return prog


def load_program(path) -> Program:
    """Read ``.slc`` or ``.json`` from disk."""
    from pathlib import Path

    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return program_from_json(json.loads(text))
    return parse_program(text)
