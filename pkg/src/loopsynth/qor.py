"""Analytical latency/resource model, NPI scoring and Pareto handling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

from .ir import (
    Assign, Binary, Builtin, CallStmt, Const, For, If, Load, LocalRef, Program, Shift, Unary, Var,
    WIDTHS, Sym, iop, is_iexpr, isyms, subst_stmt, walk_expr,
)
from .pragmas import EMPTY, PragmaConfig

BRAM_BITS = 18432


class EstimatorError(ValueError):
    pass


# --------------------------------------------------------------------------
# parameters


def _mul_dsp(w: int) -> int:
    if w == 1:
        return 0
    return math.ceil(w / 27) * math.ceil(w / 18)


def _default_latency() -> dict[str, int]:
    t = {}
    mul = {1: 1, 8: 2, 32: 3, 64: 4, 128: 6}
    wide = {1: 1, 8: 3, 32: 4, 64: 5, 128: 7}
    for w in WIDTHS:
        for op in ("add", "sub", "and", "or", "xor", "not", "addcarry", "subborrow", "cmovznz"):
            t[f"{op}_u{w}"] = 1
        for op in ("shl", "shr", "trunc", "zext"):
            t[f"{op}_u{w}"] = 0
        t[f"vshift_u{w}"] = 1
        t[f"mul_u{w}"] = mul[w]
        t[f"mulwide_u{w}"] = wide[w]
    return t


def _default_dsp() -> dict[str, int]:
    t = {}
    for w in WIDTHS:
        t[f"mul_u{w}"] = _mul_dsp(w)
        t[f"mulwide_u{w}"] = _mul_dsp(w)
    # 128-bit products are built from 64-bit partial products
    t["mul_u128"] = 3 * _mul_dsp(64)
    t["mulwide_u128"] = 4 * _mul_dsp(64)
    return t


def _default_lut() -> dict[str, int]:
    t = {}
    for w in WIDTHS:
        for op in ("add", "sub", "and", "or", "xor", "not"):
            t[f"{op}_u{w}"] = w
        t[f"addcarry_u{w}"] = w + 1
        t[f"subborrow_u{w}"] = w + 1
        t[f"cmovznz_u{w}"] = max(1, w // 2)
        for op in ("shl", "shr", "trunc", "zext"):
            t[f"{op}_u{w}"] = 0
        t[f"vshift_u{w}"] = w * max(1, (w - 1).bit_length()) // 2
        t[f"mul_u{w}"] = w if _mul_dsp(w) == 0 else 0
        t[f"mulwide_u{w}"] = 2 * w if _mul_dsp(w) == 0 else 0
    return t


@dataclass(frozen=True)
class EstimatorParams:
    latency: dict = field(default_factory=_default_latency)
    dsp: dict = field(default_factory=_default_dsp)
    lut: dict = field(default_factory=_default_lut)

    def __hash__(self):
        return hash(json.dumps(self.to_json(), sort_keys=True))

    def lookup(self, table: str, key: str) -> int:
        t = getattr(self, table)
        if table == "dsp":
            return t.get(key, 0)
        if key not in t:
            raise EstimatorError(f"no {table} entry for {key}")
        return t[key]

    def to_json(self) -> dict:
        return {"latency": dict(self.latency), "dsp": dict(self.dsp), "lut": dict(self.lut)}

    @classmethod
    def from_json(cls, d: dict) -> "EstimatorParams":
        base = cls()
        out = cls({**base.latency, **d.get("latency", {})}, {**base.dsp, **d.get("dsp", {})},
                  {**base.lut, **d.get("lut", {})})
        for table in (out.latency, out.dsp, out.lut):
            if any(not isinstance(v, int) or v < 0 for v in table.values()):
                raise EstimatorError("estimator table entries must be nonnegative integers")
        return out

    @classmethod
    def load(cls, path) -> "EstimatorParams":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    dsp_total: int
    lut_total: int
    ff_total: int
    bram_total: int

    def __post_init__(self):
        if min(self.dsp_total, self.lut_total, self.ff_total, self.bram_total) <= 0:
            raise ValueError("device totals must be positive")

    def to_json(self) -> dict:
        return {"name": self.name, "dsp_total": self.dsp_total, "lut_total": self.lut_total,
                "ff_total": self.ff_total, "bram_total": self.bram_total}


DEVICES = {"zu9eg": DeviceProfile("zu9eg", 2520, 274080, 548160, 912)}


def load_device(name_or_path: str) -> DeviceProfile:
    if name_or_path in DEVICES:
        return DEVICES[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(f"unknown device {name_or_path}")
    d = json.loads(path.read_text())
    return DeviceProfile(d.get("name", path.stem), int(d["dsp_total"]), int(d["lut_total"]),
                         int(d["ff_total"]), int(d["bram_total"]))


@dataclass(frozen=True)
class Weights:
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    @classmethod
    def parse(cls, text: str) -> "Weights":
        a, b = (float(x) for x in text.split(","))
        return cls(a, b)


@dataclass(frozen=True)
class QoR:
    latency_cycles: int = 0
    dsp: int = 0
    lut: int = 0
    ff: int = 0
    bram: int = 0

    def __post_init__(self):
        if min(self.latency_cycles, self.dsp, self.lut, self.ff, self.bram) < 0:
            raise ValueError("QoR fields must be nonnegative")

    def exceeds(self, dev: DeviceProfile) -> list[str]:
        over = []
        for name, used, total in (("dsp", self.dsp, dev.dsp_total), ("lut", self.lut, dev.lut_total),
                                  ("ff", self.ff, dev.ff_total), ("bram", self.bram, dev.bram_total)):
            if used > total:
                over.append(name)
        return over

    def to_json(self) -> dict:
        return {"latency_cycles": self.latency_cycles, "dsp": self.dsp, "lut": self.lut,
                "ff": self.ff, "bram": self.bram}


# --------------------------------------------------------------------------
# structural unrolling


def _copies(lp: For, factor: int, trip: int) -> tuple:
    """Body replicated ``factor`` times; the loop variable counts blocks afterwards."""
    out = []
    v = Sym(lp.var)
    for k in range(factor):
        if factor == trip:
            value = lp.start + lp.step * k
        else:
            value = iop("+", lp.start, iop("*", lp.step, iop("+", iop("*", factor, v), k)))
        out.extend(subst_stmt(s, {lp.var: value}) for s in lp.body)
    return tuple(out)


def _flatten(p: Program, body) -> tuple:
    """Fully unroll constant-bound loops and inline calls."""
    out = []
    for s in body:
        if isinstance(s, For) and not (isyms(s.start) | isyms(s.stop)):
            n = s.trip_count()
            out.extend(_flatten(p, _copies(s, n, n)) if n else ())
        elif isinstance(s, CallStmt):
            f = p.function(s.func)
            mapping = dict(zip(f.params, s.args))
            out.extend(_flatten(p, tuple(subst_stmt(x, mapping) for x in f.body)))
        elif isinstance(s, (For, If)):
            out.append(replace(s, body=_flatten(p, s.body)))
        else:
            out.append(s)
    return tuple(out)


@dataclass
class _Cost:
    latency: int = 0
    dsp: int = 0
    lut: int = 0
    ff: int = 0


def _op_key(e) -> str | None:
    if isinstance(e, Binary):
        return f"{e.op}_u{e.width}"
    if isinstance(e, Unary):
        return f"{e.op}_u{e.width}"
    if isinstance(e, Shift):
        return f"{e.op}_u{e.width}" if isinstance(e.amount, int) else f"vshift_u{e.width}"
    if isinstance(e, Builtin):
        return f"{e.name}_u{e.width}"
    return None


def _loc(e_or_t):
    if isinstance(e_or_t, (Var, LocalRef)):
        return (e_or_t.name, None)
    return (e_or_t.array, e_or_t.index)


class _Model:
    def __init__(self, p: Program, pragmas: PragmaConfig, params: EstimatorParams):
        self.p = p
        self.pragmas = pragmas
        self.params = params

    # straight-line timing -------------------------------------------------

    def timing(self, stmts, start=None) -> tuple[dict, list]:
        """Ready time of each written location and finish time per statement.

        ``start`` gives the ready time of locations not written in ``stmts``;
        ``None`` there means the value is off the path being measured.
        """
        ready: dict = {}
        finishes = []
        lat = self.params.latency

        def at(e):
            if isinstance(e, Const):
                return 0 if start is None else None
            if isinstance(e, (Var, Load)):
                key = _loc(e)
                if key in ready:
                    return ready[key]
                return 0 if start is None else start(key)
            ts = [at(c) for c in _kids(e)]
            ts = [t for t in ts if t is not None]
            if not ts:
                return None if start is not None else 0
            key = _op_key(e)
            if key not in lat:
                raise EstimatorError(f"no latency entry for {key}")
            return max(ts) + lat[key]

        for s in stmts:
            t = at(s.rhs)
            for tg in s.targets:
                if t is not None:
                    ready[_loc(tg)] = t
                elif start is not None:
                    ready.pop(_loc(tg), None)
            finishes.append(t)
        return ready, finishes

    def segment(self, stmts, pipelined: bool) -> _Cost:
        _, finishes = self.timing(stmts)
        c = _Cost(latency=max([f for f in finishes if f is not None], default=0))
        for s in stmts:
            for e in walk_expr(s.rhs):
                key = _op_key(e)
                if key is None:
                    continue
                c.dsp += self.params.lookup("dsp", key)
                c.lut += self.params.lookup("lut", key)
            if s.guard is not None:
                w = self.p.target_width(s.targets[0])
                c.lut += self.params.lookup("lut", f"cmovznz_u{w}")
        c.ff = c.lut if pipelined else c.lut // 2
        return c

    # regions ---------------------------------------------------------------

    def region(self, body, pipelined: bool = False) -> _Cost:
        total = _Cost()
        run: list = []

        def flush():
            if run:
                add(self.segment(run, pipelined))
                run.clear()

        def add(c: _Cost):
            total.latency += c.latency
            total.dsp = max(total.dsp, c.dsp)
            total.lut += c.lut
            total.ff += c.ff

        for s in body:
            if isinstance(s, Assign):
                run.append(s)
                continue
            flush()
            if isinstance(s, For):
                add(self.loop(s))
            elif isinstance(s, CallStmt):
                f = self.p.function(s.func)
                mapping = dict(zip(f.params, s.args))
                add(self.region(tuple(subst_stmt(x, mapping) for x in f.body), pipelined))
            elif isinstance(s, If):
                inner = self.region(s.body, pipelined)
                inner.latency += 1
                add(inner)
        flush()
        return total

    def loop(self, lp: For) -> _Cost:
        d = self.pragmas.loop(lp.label)
        env = {b.name: b.maximum for b in self.p.bounds}
        n = lp.trip_count(env) if isyms(lp.start) | isyms(lp.stop) else lp.trip_count()
        f = d.unroll if d.unroll >= 1 and n and n % d.unroll == 0 else 1
        pipelined = d.pipeline_ii is not None
        if n == 0:
            return _Cost()
        if f == n:
            return self.region(_flatten(self.p, _copies(lp, n, n)) if pipelined else _copies(lp, n, n), pipelined)
        body = _copies(lp, f, n) if f > 1 else lp.body
        trips = n // f
        if pipelined:
            body = _flatten(self.p, body)
            c = self.region(body, True)
            ii = max(d.pipeline_ii, min_legal_ii(self.p, lp.label, f, self.params))
            c.latency = ii * (trips - 1) + c.latency
            return c
        c = self.region(body, False)
        c.latency = trips * max(1, c.latency)
        return c


def _kids(e):
    if isinstance(e, (Unary, Shift)):
        return (e.arg,)
    if isinstance(e, Binary):
        return (e.a, e.b)
    if isinstance(e, Builtin):
        return tuple(a for a in e.args if not is_iexpr(a))
    return ()


def _materialized(p: Program, label: str, factor: int) -> tuple[Program, For]:
    """Program with loop ``label`` unrolled by ``factor`` and its inner loops flattened."""
    from .explorer.transforms import _rewrite_loop
    holder = {}

    def rewrite(lp):
        n = lp.trip_count()
        body = _copies(lp, factor, n) if factor > 1 else lp.body
        new = For(lp.var, 0 if factor > 1 else lp.start, n // factor if factor > 1 else lp.stop,
                  1 if factor > 1 else lp.step, _flatten(p, body), lp.label)
        holder["loop"] = new
        return [new]

    body = _rewrite_loop(p.body, label, rewrite)
    functions = tuple(replace(f, body=_rewrite_loop(f.body, label, rewrite)) for f in p.functions)
    return replace(p, body=body, functions=functions), holder["loop"]


@lru_cache(maxsize=4096)
def min_legal_ii(p: Program, label: str, factor: int, params: EstimatorParams) -> int:
    """Smallest II the recurrence allows: carried distance times the cycle's latency."""
    from .explorer.analysis import analyze_loops
    mp, lp = _materialized(p, label, factor)
    if lp.trip_count() <= 1:
        return 1
    facts = analyze_loops(mp)[label]
    if not facts.carried:
        return 1
    stmts = [s for s in lp.body if isinstance(s, Assign)]
    carried = facts.carried_arrays
    model = _Model(mp, EMPTY, params)
    ready, _ = model.timing(stmts, start=lambda key: 0 if key[0] in carried else None)
    rec = max([t for key, t in ready.items() if key[0] in carried and t is not None], default=0)
    return max(1, facts.distance * rec)


def estimate_program(p: Program, pragmas: PragmaConfig = EMPTY, params: EstimatorParams | None = None) -> QoR:
    params = params or EstimatorParams()
    model = _Model(p, pragmas, params)
    c = model.region(p.body)
    bram = 0
    if p.body or p.functions:
        for name, (w, length) in sorted(p.arrays().items()):
            bram += math.ceil(w * length / BRAM_BITS) * pragmas.partition_factor(name)
    return QoR(c.latency, c.dsp, c.lut, c.ff, bram)


def estimate(d, params: EstimatorParams | None = None, device: DeviceProfile | None = None) -> QoR:
    """QoR of a design point (``device`` only matters for overflow flags in callers)."""
    return estimate_program(d.program, d.pragmas, params)


# --------------------------------------------------------------------------
# scoring


def resource_percent(q: QoR, dev: DeviceProfile) -> float:
    return 25 * (q.dsp / dev.dsp_total + q.lut / dev.lut_total + q.ff / dev.ff_total + q.bram / dev.bram_total)


def npi_from(l: float, r: float, ls, rs, w: Weights = Weights()) -> float:
    l_min, l_max = min(ls), max(ls)
    r_min, r_max = min(rs), max(rs)
    a = (l - l_min) / (l_max - l_min) if l_max != l_min else 0.0
    b = (r - r_min) / (r_max - r_min) if r_max != r_min else 0.0
    return w.w1 * a + w.w2 * b


def npi(q: QoR, population, dev: DeviceProfile, w: Weights = Weights()) -> float:
    if not population:
        raise ValueError("empty population")
    ls = [x.latency_cycles for x in population]
    rs = [resource_percent(x, dev) for x in population]
    return npi_from(q.latency_cycles, resource_percent(q, dev), ls, rs, w)


def dominates(a, b) -> bool:
    return a.latency <= b.latency and a.r <= b.r and (a.latency < b.latency or a.r < b.r)


def pareto_filter(points: list) -> list:
    """Nondominated points on (latency, r); exact duplicates keep the lowest id."""
    best: dict = {}
    for p in points:
        key = (p.latency, p.r)
        if key not in best or p.id < best[key].id:
            best[key] = p
    ordered = sorted(best.values(), key=lambda p: (p.latency, p.r, p.id))
    front = []
    min_r = math.inf
    for p in ordered:
        if p.r < min_r:
            front.append(p)
            min_r = p.r
    return front


def hypervolume(front: list, ref: tuple[float, float]) -> float:
    """Area dominated by ``front`` and bounded by ``ref`` (both objectives minimized)."""
    pts = sorted((p.latency, p.r) for p in front if p.latency <= ref[0] and p.r <= ref[1])
    area = 0.0
    prev_r = ref[1]
    for l, r in pts:
        if r < prev_r:
            area += (ref[0] - l) * (prev_r - r)
            prev_r = r
    return area


def refine(front: list, explorer, rounds: int) -> list:
    """Grow the front by estimating neighbours of its points, ``rounds`` times.

    ``explorer`` supplies ``neighbors(point)`` and ``add(point)``; ``add``
    estimates a new point and returns the stored (possibly pre-existing) one.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    front = list(front)
    for _ in range(rounds):
        pool = {p.id: p for p in front}
        for p in front:
            for q in explorer.neighbors(p):
                q = explorer.add(q)
                pool[q.id] = q
        new = pareto_filter(list(pool.values()))
        if [p.id for p in new] == [p.id for p in front]:
            break
        front = new
    return front
