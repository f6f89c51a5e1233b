"""Equality saturation over statement sequences with range-merging rewrites.

A sequence is encoded as a cons list so that every contiguous suffix is an
e-class of its own; the merge rules then only ever look at two adjacent heads.
Operation nodes carry their arguments inline, since argument leaves are never
unified with anything.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ir import For, Program, Sym, iop
from .templates import AbstractSequence, Template, canonicalize


# --------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class ConstArg:
    value: int


@dataclass(frozen=True)
class RangeArg:
    start: int
    stop: int  # inclusive
    step: int

    def __post_init__(self):
        if self.step == 0 or (self.stop - self.start) % self.step:
            raise ValueError(f"malformed range {self}")
        if self.count < 2:
            raise ValueError(f"range {self} has fewer than two elements")

    @property
    def count(self) -> int:
        return (self.stop - self.start) // self.step + 1


@dataclass(frozen=True)
class Op:
    template: str
    args: tuple
    pinned: bool = False

    @property
    def count(self) -> int:
        counts = {a.count for a in self.args if isinstance(a, RangeArg)}
        if len(counts) > 1:
            raise ValueError(f"inconsistent trip counts in {self}")
        return counts.pop() if counts else 1

    @property
    def is_ranged(self) -> bool:
        return any(isinstance(a, RangeArg) for a in self.args)


@dataclass(frozen=True)
class Seq:
    children: tuple


def term_cost(t) -> int:
    if isinstance(t, ConstArg):
        return 1
    if isinstance(t, RangeArg):
        return 3
    if isinstance(t, Op):
        return 1 + sum(term_cost(a) for a in t.args)
    return 1 + sum(term_cost(c) for c in t.children)


def expand(t) -> list[tuple[str, tuple]]:
    """Unroll a term into its (template, constants) statement list."""
    if isinstance(t, Seq):
        return [x for c in t.children for x in expand(c)]
    out = []
    for k in range(t.count):
        out.append((t.template, tuple(a.value if isinstance(a, ConstArg) else a.start + k * a.step
                                      for a in t.args)))
    return out


def to_term(seqs: list[AbstractSequence]) -> Seq:
    ops = []
    for s in seqs:
        for inst in s.instances:
            ops.append((inst.line_no, Op(s.template_id, tuple(ConstArg(c) for c in inst.consts), s.excluded)))
    ops.sort(key=lambda x: x[0])
    return Seq(tuple(op for _, op in ops))


def merge_ops(a: Op, b: Op) -> Op | None:
    """R1/R2/R3: the single op covering ``a`` followed by ``b``, if any."""
    if a.template != b.template or a.pinned or b.pinned or len(a.args) != len(b.args):
        return None
    ra, rb = a.is_ranged, b.is_ranged
    if ra and rb:
        return None
    args = []
    if not ra and not rb:
        if a.args == b.args:
            return None
        for x, y in zip(a.args, b.args):
            args.append(x if x == y else RangeArg(x.value, y.value, y.value - x.value))
        return Op(a.template, tuple(args))
    if ra:
        for x, y in zip(a.args, b.args):
            if isinstance(x, RangeArg):
                if y.value != x.stop + x.step:
                    return None
                args.append(RangeArg(x.start, y.value, x.step))
            elif x != y:
                return None
            else:
                args.append(x)
        return Op(a.template, tuple(args))
    for x, y in zip(a.args, b.args):
        if isinstance(y, RangeArg):
            if x.value != y.start - y.step:
                return None
            args.append(RangeArg(x.value, y.stop, y.step))
        elif x != y:
            return None
        else:
            args.append(y)
    return Op(a.template, tuple(args))


# --------------------------------------------------------------------------
# e-graph

NIL = ("nil",)


@dataclass(frozen=True)
class SaturationConfig:
    max_iterations: int = 64
    max_enodes: int = 50_000
    min_sequence_ops: int = 2

    def __post_init__(self):
        if min(self.max_iterations, self.max_enodes, self.min_sequence_ops) <= 0:
            raise ValueError("saturation limits must be positive")


class EGraph:
    def __init__(self):
        self.parent: list[int] = []
        self.classes: dict[int, set] = {}
        self.memo: dict[tuple, int] = {}
        self.length: dict[int, int] = {}

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def canon(self, node: tuple) -> tuple:
        if node[0] == "cons":
            return ("cons", self.find(node[1]), self.find(node[2]))
        return node

    def add(self, node: tuple) -> int:
        node = self.canon(node)
        if node in self.memo:
            return self.find(self.memo[node])
        cid = len(self.parent)
        self.parent.append(cid)
        self.classes[cid] = {node}
        self.memo[node] = cid
        if node[0] == "op":
            self.length[cid] = node[1].count
        elif node[0] == "cons":
            self.length[cid] = self.length[node[1]] + self.length[node[2]]
        else:
            self.length[cid] = 0
        return cid

    def union(self, a: int, b: int) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if self.length[a] != self.length[b]:
            raise AssertionError("merging classes of different statement counts")
        if len(self.classes[a]) < len(self.classes[b]):
            a, b = b, a
        self.parent[b] = a
        self.classes[a] |= self.classes.pop(b)
        return True

    def rebuild(self) -> None:
        """Restore congruence closure after unions."""
        changed = True
        while changed:
            changed = False
            memo: dict[tuple, int] = {}
            for root in list(self.classes):
                if root not in self.classes:
                    continue
                self.classes[root] = {self.canon(n) for n in self.classes[root]}
                for n in list(self.classes.get(root, ())):
                    other = memo.get(n)
                    if other is not None and self.find(other) != self.find(root):
                        self.union(other, root)
                        changed = True
                    else:
                        memo[n] = self.find(root)
            self.memo = {n: self.find(c) for n, c in memo.items()}

    @property
    def node_count(self) -> int:
        return sum(len(ns) for ns in self.classes.values())

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def add_seq(self, ops) -> int:
        cid = self.add(NIL)
        for op in reversed(ops):
            cid = self.add(("cons", self.add(("op", op)), cid))
        return cid

    def op(self, cid: int) -> Op:
        (node,) = self.classes[self.find(cid)]
        return node[1]

    def cons_nodes(self, cid: int) -> list[tuple]:
        return sorted((n for n in self.classes[self.find(cid)] if n[0] == "cons"), key=lambda n: (n[1], n[2]))


@dataclass
class Saturation:
    egraph: EGraph
    root: int
    truncated: bool
    iterations: int

    def to_json(self) -> dict:
        return {
            "classes": self.egraph.class_count,
            "nodes": self.egraph.node_count,
            "iterations": self.iterations,
            "truncated": self.truncated,
        }


def saturate(t: Seq, cfg: SaturationConfig = SaturationConfig(), debug: bool = False) -> Saturation:
    """Apply R1-R3 until fixpoint or a limit; ``debug`` checks each firing by unrolling."""
    eg = EGraph()
    root = eg.add_seq(t.children)
    truncated = False
    iterations = 0
    while True:
        if iterations >= cfg.max_iterations:
            truncated = True
            break
        iterations += 1
        matches = []
        for cid in sorted(eg.classes):
            for node in eg.cons_nodes(cid):
                a = eg.op(node[1])
                for nxt in eg.cons_nodes(node[2]):
                    b = eg.op(nxt[1])
                    m = merge_ops(a, b)
                    if m is not None:
                        if debug and expand(m) != expand(a) + expand(b):
                            raise AssertionError(f"unsound merge of {a} and {b}")
                        matches.append((cid, m, nxt[2]))
        before = eg.node_count
        changed = False
        for cid, m, rest in matches:
            new = eg.add(("cons", eg.add(("op", m)), rest))
            changed |= eg.union(cid, new)
            if eg.node_count > cfg.max_enodes:
                truncated = True
                break
        eg.rebuild()
        if truncated or (not changed and eg.node_count == before):
            break
    return Saturation(eg, eg.find(root), truncated, iterations)


def _topological(eg: EGraph) -> list[int]:
    # heads and tails are strictly shorter than their cons class, or are op/nil classes
    def rank(c):
        is_cons = any(n[0] == "cons" for n in eg.classes[c])
        return (eg.length[c], is_cons, c)
    return sorted(eg.classes, key=rank)


def class_expansions(eg: EGraph) -> dict[int, list]:
    """Statement list of every class, checking all its nodes agree (soundness)."""
    out: dict[int, list] = {}
    for cid in _topological(eg):
        lists = []
        for n in eg.classes[cid]:
            if n[0] == "nil":
                lists.append([])
            elif n[0] == "op":
                lists.append(expand(n[1]))
            else:
                lists.append(out[eg.find(n[1])] + out[eg.find(n[2])])
        if any(x != lists[0] for x in lists):
            raise AssertionError(f"class {cid} holds terms with different unrollings")
        out[cid] = lists[0]
    return out


def _op_key(op: Op) -> tuple:
    return (op.template, op.pinned, tuple(
        ("c", a.value) if isinstance(a, ConstArg) else ("r", a.start, a.stop, a.step) for a in op.args))


def extract_best(sat: Saturation) -> Seq:
    """Minimal-cost term; ties prefer fewer children, then the smallest structure."""
    eg = sat.egraph
    best: dict[int, tuple] = {}
    for cid in _topological(eg):
        cands = []
        for n in eg.classes[cid]:
            if n[0] == "nil":
                cands.append((1, 0, (), ()))
            elif n[0] == "op":
                op = n[1]
                cands.append((term_cost(op), 1, (_op_key(op),), (op,)))
            else:
                h, tl = best[eg.find(n[1])], best[eg.find(n[2])]
                cands.append((h[0] + tl[0], h[1] + tl[1], h[2] + tl[2], h[3] + tl[3]))
        best[cid] = min(cands, key=lambda c: c[:3])
    return Seq(best[eg.find(sat.root)][3])


def all_terms(sat: Saturation, limit: int = 100_000) -> list[Seq]:
    """Every sequence term represented by the root class (small graphs only)."""
    eg = sat.egraph
    memo: dict[int, list] = {}

    def terms(cid: int) -> list:
        cid = eg.find(cid)
        if cid in memo:
            return memo[cid]
        out = []
        for n in eg.classes[cid]:
            if n[0] == "nil":
                out.append(())
            elif n[0] == "cons":
                for tail in terms(n[2]):
                    out.append((eg.op(n[1]),) + tail)
            if len(out) > limit:
                raise ValueError("too many terms to enumerate")
        memo[cid] = out
        return out

    return [Seq(t) for t in terms(sat.root)]


# --------------------------------------------------------------------------
# targets and lowering


def select_targets(seqs: list[AbstractSequence], cfg: SaturationConfig) -> list[AbstractSequence]:
    out = []
    for s in seqs:
        excluded = s.excluded or len(s.instances) < cfg.min_sequence_ops
        out.append(AbstractSequence(s.template, list(s.instances), excluded))
    return out


def _loop_var(p: Program) -> str:
    taken = {q.name for q in p.params} | {loc.name for loc in p.locals} | {b.name for b in p.bounds}
    name = "i"
    while name in taken:
        name += "_"
    return name


def _position(r: RangeArg, var: str):
    term = Sym(var) if abs(r.step) == 1 else iop("*", abs(r.step), Sym(var))
    if r.step > 0:
        return iop("+", term, r.start)
    return iop("-", r.start, term)


def lower_to_loops(t: Seq, templates: dict[str, Template], base: Program) -> Program:
    """Turn each ranged op into a counted loop over the base program's declarations.

    Unmerged ops keep the base program's own statement text when it matches.
    """
    var = _loop_var(base)
    body = []
    n_loops = 0
    pos = 0
    for op in t.children:
        tpl = templates[op.template]
        start, pos = pos, pos + op.count
        if not op.is_ranged:
            stmt = tpl.instantiate([a.value for a in op.args])
            if start < len(base.body) and canonicalize(base.body[start]) == stmt:
                stmt = base.body[start]
            body.append(stmt)
            continue
        n = op.count
        consts = [a.value if isinstance(a, ConstArg) else _position(a, var) for a in op.args]
        stmt = tpl.instantiate(consts)
        body.append(For(var, 0, n, 1, (stmt,), f"L{n_loops}"))
        n_loops += 1
    return base.with_body(body)

