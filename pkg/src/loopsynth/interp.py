"""Reference interpreter, randomized equivalence checking and full unrolling.

Evaluation is lane-parallel: every runtime value is a numpy object array with
one Python integer per input vector, so a batch of a thousand vectors costs
one interpreter pass.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .ir import (
    Assign, Binary, Builtin, CallStmt, Const, ElemRef, Extern, For, If, IRError, Load, LocalRef,
    Program, Shift, Unary, Var, ieval, is_iexpr, isubst, map_iexprs, mask,
)


class SignatureMismatch(ValueError):
    pass


class EvalError(RuntimeError):
    pass


InputVector = dict  # array name -> list[int]


class _Machine:
    def __init__(self, p: Program, lanes: int, bounds: dict[str, int] | None):
        self.p = p
        self.n = lanes
        self.shapes = p.arrays()
        self.mem: dict[str, list] = {}
        self.scalars: dict[str, np.ndarray] = {}
        self.base_env = dict(bounds or {})
        missing = [b.name for b in p.bounds if b.name not in self.base_env]
        if missing:
            raise EvalError(f"no value supplied for bound parameter(s) {missing}")
        for b in p.bounds:
            if not 0 <= self.base_env[b.name] <= b.maximum:
                raise EvalError(f"bound {b.name}={self.base_env[b.name]} exceeds its maximum {b.maximum}")
        self._consts: dict[int, np.ndarray] = {}

    def const(self, v: int) -> np.ndarray:
        arr = self._consts.get(v)
        if arr is None:
            arr = np.empty(self.n, dtype=object)
            arr[:] = v
            self._consts[v] = arr
        return arr

    def index(self, array: str, idx, env) -> int:
        i = ieval(idx, env)
        n = self.shapes[array][1]
        if not 0 <= i < n:
            raise EvalError(f"index {i} out of bounds for {array}[{n}]")
        return i

    def expr(self, e, env):
        if isinstance(e, Load):
            return self.mem[e.array][self.index(e.array, e.index, env)]
        if isinstance(e, Var):
            return self.scalars[e.name]
        if isinstance(e, Const):
            return self.const(ieval(e.value, env) & mask(e.width))
        m = mask(e.width)
        if isinstance(e, Binary):
            a, b = self.expr(e.a, env), self.expr(e.b, env)
            op = e.op
            if op == "add":
                return (a + b) & m
            if op == "sub":
                return (a - b) & m
            if op == "mul":
                return (a * b) & m
            if op == "and":
                return a & b
            if op == "or":
                return a | b
            if op == "xor":
                return a ^ b
            raise IRError(f"unknown operator {op}")
        if isinstance(e, Shift):
            a = self.expr(e.arg, env)
            k = ieval(e.amount, env)
            if not 0 <= k < e.width:
                raise EvalError(f"shift amount {k} out of range for u{e.width}")
            return (a << k) & m if e.op == "shl" else a >> k
        if isinstance(e, Unary):
            a = self.expr(e.arg, env)
            if e.op == "not":
                return a ^ m
            return a & m
        if isinstance(e, Builtin):
            return self.builtin(e, env)
        if isinstance(e, Extern):
            raise EvalError(f"cannot evaluate call to non-builtin {e.name}")
        raise TypeError(e)

    def builtin(self, e: Builtin, env):
        w, m = e.width, mask(e.width)
        if e.name == "cmovznz":
            flag, a, b = e.args
            a, b = self.expr(a, env), self.expr(b, env)
            if is_iexpr(flag):
                return b if ieval(flag, env) else a
            f = self.expr(flag, env)
            return np.where(f != 0, b, a)
        args = [self.expr(a, env) for a in e.args]
        if e.name == "addcarry":
            c, a, b = args
            s = c + a + b
            return s & m, s >> w
        if e.name == "subborrow":
            c, a, b = args
            d = a - b - c
            return d & m, (d >> w) & 1
        if e.name == "mulwide":
            a, b = args
            prod = a * b
            return prod >> w, prod & m
        raise IRError(f"unknown builtin {e.name}")

    def write(self, t, value, env, lane_mask):
        if isinstance(t, LocalRef):
            if lane_mask is not None:
                raise EvalError(f"local {t.name} written under a branch")
            self.scalars[t.name] = value
            return
        i = self.index(t.array, t.index, env)
        cell = self.mem[t.array]
        cell[i] = value if lane_mask is None else np.where(lane_mask, value, cell[i])

    def run(self, body, env, lane_mask=None):
        for s in body:
            if isinstance(s, Assign):
                if s.guard is not None and not ieval(s.guard, env):
                    continue
                v = self.expr(s.rhs, env)
                if len(s.targets) == 1:
                    self.write(s.targets[0], v, env, lane_mask)
                else:
                    for t, part in zip(s.targets, v):
                        self.write(t, part, env, lane_mask)
            elif isinstance(s, For):
                inner = dict(env)
                for v in s.values(env):
                    inner[s.var] = v
                    self.run(s.body, inner, lane_mask)
            elif isinstance(s, If):
                c = self.expr(s.cond, env) != 0
                self.run(s.body, env, c if lane_mask is None else lane_mask & c)
            elif isinstance(s, CallStmt):
                f = self.p.function(s.func)
                fenv = dict(self.base_env)
                fenv.update({name: ieval(a, env) for name, a in zip(f.params, s.args)})
                self.run(f.body, fenv, lane_mask)
            else:
                raise TypeError(s)


def _batch_inputs(p: Program, vectors: list[InputVector]) -> dict[str, list]:
    out = {}
    n = len(vectors)
    for q in p.params:
        if q.direction == "in":
            table = np.empty((q.length, n), dtype=object)
            table[:, :] = np.array([vec[q.name] for vec in vectors], dtype=object).reshape(n, q.length).T
            out[q.name] = list(table)
        else:
            out[q.name] = [np.zeros(n, dtype=object) for _ in range(q.length)]
    return out


def _check_vector(p: Program, x: InputVector) -> None:
    for q in p.params:
        if q.direction != "in":
            continue
        if q.name not in x:
            raise ValueError(f"input vector lacks array {q.name}")
        vals = x[q.name]
        if len(vals) != q.length:
            raise ValueError(f"input {q.name} has {len(vals)} values, expected {q.length}")
        if vals and (min(vals) < 0 or max(vals) > mask(q.width)):
            bad = next(v for v in vals if not 0 <= v <= mask(q.width))
            raise ValueError(f"input value {bad} out of range for u{q.width} array {q.name}")


def eval_batch(p: Program, vectors: list[InputVector], bounds: dict[str, int] | None = None) -> dict[str, list]:
    """Evaluate ``p`` on many vectors; returns out-array name -> per-element lane arrays."""
    for x in vectors:
        _check_vector(p, x)
    vm = _Machine(p, len(vectors), bounds)
    vm.mem = _batch_inputs(p, vectors)
    for loc in p.locals:
        if loc.is_array:
            vm.mem[loc.name] = [vm.const(0)] * loc.length
    vm.run(p.body, dict(vm.base_env))
    return {q.name: vm.mem[q.name] for q in p.params if q.direction == "out"}


def evaluate(p: Program, x: InputVector, bounds: dict[str, int] | None = None) -> dict[str, list[int]]:
    """Run ``p`` on one input vector and return its output arrays.

    Output arrays start zeroed; every operation wraps to its declared width.
    """
    res = eval_batch(p, [x], bounds)
    return {name: [int(cell[0]) for cell in cells] for name, cells in res.items()}


# --------------------------------------------------------------------------
# equivalence


@dataclass
class Counterexample:
    inputs: InputVector
    array: str
    index: int
    left: int
    right: int

    def to_json(self) -> dict:
        return {"inputs": self.inputs, "location": f"{self.array}[{self.index}]",
                "left": self.left, "right": self.right}


@dataclass
class EquivVerdict:
    equivalent: bool
    vectors_tested: int
    seed: int
    counterexample: Counterexample | None = None
    bounds: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {"equivalent": self.equivalent, "vectors_tested": self.vectors_tested, "seed": self.seed}
        if self.bounds:
            d["bounds"] = self.bounds
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample.to_json()
        return d


def corner_vectors(p: Program) -> list[InputVector]:
    """All-zero, all-ones, alternating bits and one vector per single-bit position."""
    ins = [q for q in p.params if q.direction == "in"]
    if not ins:
        return [{}]
    maxw = max(q.width for q in ins)

    def fill(fn):
        return {q.name: [fn(q.width) for _ in range(q.length)] for q in ins}

    out = [fill(lambda w: 0), fill(mask),
           fill(lambda w: mask(w) // 3), fill(lambda w: mask(w) ^ (mask(w) // 3))]
    for k in range(maxw):
        out.append(fill(lambda w, k=k: 1 << (k % w)))
    return out


def random_vectors(p: Program, n: int, seed: int) -> list[InputVector]:
    rng = random.Random(seed)
    ins = [q for q in p.params if q.direction == "in"]
    return [{q.name: [rng.getrandbits(q.width) for _ in range(q.length)] for q in ins} for _ in range(n)]


def check_equiv(p1: Program, p2: Program, n_vectors: int = 1000, seed: int = 0,
                bounds: dict[str, int] | None = None) -> EquivVerdict:
    """Bit-exact comparison of two kernels on corner vectors plus ``n_vectors`` seeded ones."""
    if p1.signature != p2.signature:
        raise SignatureMismatch(f"signatures differ: {p1.signature} vs {p2.signature}")
    vectors = corner_vectors(p1) + random_vectors(p1, n_vectors, seed)
    r1 = eval_batch(p1, vectors, bounds)
    r2 = eval_batch(p2, vectors, bounds)
    first = None
    for q in p1.params:
        if q.direction != "out":
            continue
        for i, (a, b) in enumerate(zip(r1[q.name], r2[q.name])):
            diff = np.nonzero(a != b)[0]
            if len(diff):
                lane = int(diff[0])
                if first is None or lane < first[0]:
                    first = (lane, q.name, i, int(a[lane]), int(b[lane]))
    verdict = EquivVerdict(first is None, len(vectors), seed, bounds=dict(bounds or {}))
    if first is not None:
        lane, name, i, left, right = first
        verdict.counterexample = Counterexample(vectors[lane], name, i, left, right)
    return verdict


# --------------------------------------------------------------------------
# unrolling


def _concretize(s: Assign, env) -> Assign | None:
    if s.guard is not None and not ieval(s.guard, env):
        return None
    fn = lambda e: isubst(e, env)  # noqa: E731
    rhs = _wrap_consts(map_iexprs(s.rhs, fn))
    targets = tuple(ElemRef(t.array, fn(t.index)) if isinstance(t, ElemRef) else t for t in s.targets)
    return Assign(targets, rhs, None, s.line)


def _wrap_consts(e):
    if isinstance(e, Const):
        return Const(e.value & mask(e.width), e.width) if isinstance(e.value, int) else e
    if isinstance(e, Unary):
        return Unary(e.op, _wrap_consts(e.arg), e.width)
    if isinstance(e, Binary):
        return Binary(e.op, _wrap_consts(e.a), _wrap_consts(e.b), e.width)
    if isinstance(e, Shift):
        return Shift(e.op, _wrap_consts(e.arg), e.amount, e.width)
    if isinstance(e, Builtin):
        return Builtin(e.name, e.width, tuple(a if is_iexpr(a) else _wrap_consts(a) for a in e.args))
    return e


def unroll(s: Program, bounds: dict[str, int] | None = None) -> Program:
    """Expand every loop and inline every outlined call, yielding straight-line code."""
    base = dict(bounds or {})
    for b in s.bounds:
        if b.name not in base:
            raise EvalError(f"no value supplied for bound parameter {b.name}")

    def expand(body, env):
        out = []
        for st in body:
            if isinstance(st, Assign):
                c = _concretize(st, env)
                if c is not None:
                    out.append(c)
            elif isinstance(st, For):
                inner = dict(env)
                for v in st.values(env):
                    inner[st.var] = v
                    out.extend(expand(st.body, inner))
            elif isinstance(st, CallStmt):
                f = s.function(st.func)
                fenv = dict(base)
                fenv.update({name: ieval(a, env) for name, a in zip(f.params, st.args)})
                out.extend(expand(f.body, fenv))
            elif isinstance(st, If):
                out.append(If(map_iexprs(st.cond, lambda e: isubst(e, env)), tuple(expand(st.body, env)), st.line))
            else:
                raise TypeError(st)
        return out

    return Program(s.name, s.params, s.locals, tuple(expand(s.body, dict(base))))
