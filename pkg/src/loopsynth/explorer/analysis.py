"""Loop facts: trip counts, nesting, access strides and carried dependences.

Dependences are found by enumerating iterations and comparing the concrete
locations they touch.  Any index that is not affine in the loop variables
marks the written array as carried at distance 1 regardless.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..ir import (
    Assign, CallStmt, For, If, Load, LocalRef, Program, Var, iaffine, ieval, isyms, walk_expr,
)


def bound_env(p: Program, bounds: dict | None = None) -> dict[str, int]:
    env = {b.name: b.maximum for b in p.bounds}
    env.update(bounds or {})
    return env


def _guard_active(guard, env) -> bool:
    if guard is None:
        return True
    if not isyms(guard) <= set(env):
        return True  # unknown at analysis time: assume it may fire
    return bool(ieval(guard, env))


def collect_accesses(p: Program, body, env: dict, reads: set, writes: set) -> None:
    """Concrete (array, index) locations read and written by one execution of ``body``."""
    for s in body:
        if isinstance(s, Assign):
            for e in walk_expr(s.rhs):
                if isinstance(e, Load):
                    reads.add((e.array, ieval(e.index, env)))
                elif isinstance(e, Var):
                    reads.add((e.name, None))
            for t in s.targets:
                key = (t.name, None) if isinstance(t, LocalRef) else (t.array, ieval(t.index, env))
                if _guard_active(s.guard, env):
                    writes.add(key)
                if s.guard is not None:
                    reads.add(key)
        elif isinstance(s, For):
            inner = dict(env)
            for v in s.values(env):
                inner[s.var] = v
                collect_accesses(p, s.body, inner, reads, writes)
        elif isinstance(s, If):
            for e in walk_expr(s.cond):
                if isinstance(e, Load):
                    reads.add((e.array, ieval(e.index, env)))
            collect_accesses(p, s.body, env, reads, writes)
        elif isinstance(s, CallStmt):
            f = p.function(s.func)
            fenv = {k: v for k, v in env.items() if k in {b.name for b in p.bounds}}
            fenv.update({name: ieval(a, env) for name, a in zip(f.params, s.args)})
            collect_accesses(p, f.body, fenv, reads, writes)


def iteration_accesses(p: Program, lp: For, env: dict) -> list[tuple[set, set]]:
    out = []
    inner = dict(env)
    for v in lp.values(env):
        inner[lp.var] = v
        r: set = set()
        w: set = set()
        collect_accesses(p, lp.body, inner, r, w)
        out.append((r, w))
    return out


def conflicts(a: tuple[set, set], b: tuple[set, set]) -> set:
    """Locations on which two access sets conflict (at least one side writes)."""
    ra, wa = a
    rb, wb = b
    return (wa & (rb | wb)) | (ra & wb)


def min_carried_distance(iters: list[tuple[set, set]]) -> tuple[int | None, set]:
    """Smallest iteration distance of a conflict, and the arrays involved."""
    touched: dict = {}
    for k, (r, w) in enumerate(iters):
        for loc in r:
            touched.setdefault(loc, ([], []))[0].append(k)
        for loc in w:
            touched.setdefault(loc, ([], []))[1].append(k)
    best = None
    arrays = set()
    for loc, (rs, ws) in touched.items():
        if not ws:
            continue
        d = None
        all_k = sorted(set(rs) | set(ws))
        for w in ws:
            for k in all_k:
                if k != w and (d is None or abs(k - w) < d):
                    d = abs(k - w)
        if d is not None:
            arrays.add(loc[0])
            best = d if best is None else min(best, d)
    return best, arrays


def _body_indices(p: Program, body):
    """(array, index, is_write) for every syntactic access, including called helpers."""
    for s in body:
        if isinstance(s, Assign):
            for t in s.targets:
                if not isinstance(t, LocalRef):
                    yield t.array, t.index, True
            for e in walk_expr(s.rhs):
                if isinstance(e, Load):
                    yield e.array, e.index, False
        elif isinstance(s, (For, If)):
            if isinstance(s, If):
                for e in walk_expr(s.cond):
                    if isinstance(e, Load):
                        yield e.array, e.index, False
            yield from _body_indices(p, s.body)
        elif isinstance(s, CallStmt):
            yield from _body_indices(p, p.function(s.func).body)


@dataclass(frozen=True)
class LoopFacts:
    label: str
    var: str
    trip_count: int
    depth: int
    parent: str | None
    carried: bool
    distance: int | None
    carried_arrays: frozenset
    strides: tuple  # ((array, (stride | None, ...)), ...)
    perfect: bool
    read_arrays: frozenset
    written_arrays: frozenset
    in_function: str | None = None

    def to_json(self) -> dict:
        return {
            "label": self.label, "trip_count": self.trip_count, "depth": self.depth,
            "parent": self.parent, "carried": self.carried, "distance": self.distance,
            "carried_arrays": sorted(self.carried_arrays), "perfect": self.perfect,
            "strides": {a: list(s) for a, s in self.strides},
        }


@dataclass
class LoopInfo:
    loops: dict = field(default_factory=dict)  # label -> LoopFacts, program order
    calls: list = field(default_factory=list)

    def __getitem__(self, label: str) -> LoopFacts:
        return self.loops[label]

    def to_json(self) -> dict:
        return {"loops": [f.to_json() for f in self.loops.values()], "calls": list(self.calls)}


def _contexts(p: Program, env: dict):
    """Every dynamic (loop, enclosing env, depth, parent, function) instance."""
    bound_names = {b.name for b in p.bounds}

    def visit(body, env, depth, parent, func):
        for s in body:
            if isinstance(s, For):
                yield s, env, depth, parent, func
                inner = dict(env)
                for v in s.values(env):
                    inner[s.var] = v
                    yield from visit(s.body, inner, depth + 1, s.label, func)
            elif isinstance(s, If):
                yield from visit(s.body, env, depth, parent, func)
            elif isinstance(s, CallStmt):
                f = p.function(s.func)
                fenv = {k: v for k, v in env.items() if k in bound_names}
                fenv.update({name: ieval(a, env) for name, a in zip(f.params, s.args)})
                yield from visit(f.body, fenv, depth, parent, f.name)

    yield from visit(p.body, env, 0, None, None)


def _strides(p: Program, lp: For) -> tuple:
    out: dict[str, set] = {}
    for arr, idx, _ in _body_indices(p, lp.body):
        aff = iaffine(idx)
        out.setdefault(arr, set()).add(None if aff is None else aff.get(lp.var, 0))
    return tuple(sorted((a, tuple(sorted(s, key=lambda x: (x is None, x or 0)))) for a, s in out.items()))


def analyze_loops(s: Program, bounds: dict | None = None) -> LoopInfo:
    env = bound_env(s, bounds)
    info = LoopInfo()
    seen: dict[str, dict] = {}
    for lp, outer, depth, parent, func in _contexts(s, env):
        acc = seen.setdefault(lp.label, {
            "loop": lp, "depth": depth, "parent": parent, "func": func,
            "trip": 0, "distance": None, "arrays": set(),
        })
        iters = iteration_accesses(s, lp, outer)
        acc["trip"] = max(acc["trip"], len(iters))
        d, arrays = min_carried_distance(iters)
        if d is not None:
            acc["distance"] = d if acc["distance"] is None else min(acc["distance"], d)
            acc["arrays"] |= arrays
    for label, acc in seen.items():
        lp = acc["loop"]
        reads, writes = set(), set()
        nonaffine = set()
        for arr, idx, is_write in _body_indices(s, lp.body):
            (writes if is_write else reads).add(arr)
            if iaffine(idx) is None:
                nonaffine.add(arr)
        distance, carried_arrays = acc["distance"], set(acc["arrays"])
        forced = nonaffine & writes
        if forced:
            distance = 1
            carried_arrays |= forced
        inner_loops = [c for c in lp.body if isinstance(c, For)]
        perfect = not inner_loops or len(lp.body) == 1
        info.loops[label] = LoopFacts(
            label, lp.var, acc["trip"], acc["depth"], acc["parent"], distance is not None, distance,
            frozenset(carried_arrays), _strides(s, lp), perfect, frozenset(reads), frozenset(writes),
            acc["func"],
        )
    info.calls = [c.func for c in _walk_calls(s.body)]
    return info


def _walk_calls(body):
    for st in body:
        if isinstance(st, CallStmt):
            yield st
        elif isinstance(st, (For, If)):
            yield from _walk_calls(st.body)
