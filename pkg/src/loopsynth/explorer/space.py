"""Variant and directive enumeration, and the resulting design space."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from itertools import product

from ..emit import emit_c
from ..interp import EquivVerdict, check_equiv
from ..ir import For, If, Program, loops, walk_stmts
from ..pragmas import EMPTY, LoopDirectives, PragmaConfig
from ..qor import (
    DeviceProfile, DEVICES, EstimatorParams, QoR, Weights, estimate_program, min_legal_ii, npi_from,
    resource_percent,
)
from .analysis import analyze_loops
from .transforms import (
    BranchEliminate, Fuse, IllegalTransform, Interchange, Outline, Pad, Perfectize, StaticizeBounds,
    StrengthReduce, Tile, Transform, _sibling_pairs, apply_transform, has_branches, has_variable_bounds,
    outline_groups, staticize_bounds,
)

log = logging.getLogger(__name__)

STAGES = ("interchange", "pad", "fuse", "perfectize", "branch_eliminate", "strength_reduce", "tile", "outline")


@dataclass(frozen=True)
class ExplorerConfig:
    max_variants: int = 64
    max_pragma_sets: int = 256
    max_unroll: int = 16
    tile_factors: tuple = (2, 4)
    n_vectors: int = 1000
    seed: int = 0


@dataclass
class Variant:
    program: Program
    transforms: tuple = ()


def _all_loops(p: Program) -> list[For]:
    return list(loops(p.body)) + [lp for f in p.functions for lp in loops(f.body)]


def _constant(lp: For) -> bool:
    return isinstance(lp.start, int) and isinstance(lp.stop, int)


def _candidates(stage: str, p: Program, cfg: ExplorerConfig) -> list[Transform]:
    out: list[Transform] = []
    if stage == "interchange":
        for lp in loops(p.body):
            if len(lp.body) == 1 and isinstance(lp.body[0], For):
                out.append(Interchange(lp.label, lp.body[0].label))
    elif stage == "pad":
        for a, b in _sibling_pairs(p.body):
            if _constant(a) and _constant(b) and a.trip_count() != b.trip_count():
                small, big = (a, b) if a.trip_count() < b.trip_count() else (b, a)
                out.append(Pad(small.label, big.trip_count()))
    elif stage == "fuse":
        for a, b in _sibling_pairs(p.body):
            if _constant(a) and _constant(b) and a.trip_count() == b.trip_count():
                out.append(Fuse(a.label, b.label))
    elif stage == "perfectize":
        for lp in loops(p.body):
            inner = [s for s in lp.body if isinstance(s, For)]
            if len(inner) == 1 and len(lp.body) > 1:
                out.append(Perfectize(lp.label))
    elif stage == "branch_eliminate":
        if has_branches(p):
            out.append(BranchEliminate())
    elif stage == "strength_reduce":
        out.append(StrengthReduce())
    elif stage == "tile":
        for lp in loops(p.body):
            if not _constant(lp):
                continue
            n = lp.trip_count()
            for f in cfg.tile_factors:
                if 1 < f < n and n % f == 0:
                    out.append(Tile(lp.label, f))
    elif stage == "outline":
        out.extend(Outline(g) for g in outline_groups(p))
    return out


def prepare(s: Program) -> Variant:
    """Mandatory clean-up: static loop bounds and branch-free bodies."""
    trs: tuple = ()
    if has_variable_bounds(s):
        s = staticize_bounds(s)
        trs += (StaticizeBounds(),)
    if has_branches(s):
        s = apply_transform(s, BranchEliminate())
        trs += (BranchEliminate(),)
    return Variant(s, trs)


def enumerate_variants(s: Program, cfg: ExplorerConfig = ExplorerConfig(),
                       warnings: list | None = None) -> list[Variant]:
    """Original plus every legal subset of stages, one transform per stage, in stage order."""
    base = prepare(s)
    variants = [base]
    seen = {emit_c(base.program)}
    capped = False
    for stage in STAGES:
        for v in list(variants):
            for t in _candidates(stage, v.program, cfg):
                try:
                    q = apply_transform(v.program, t)
                except IllegalTransform as e:
                    log.debug("rejected %s: %s", t, e.reason)
                    continue
                text = emit_c(q)
                if text in seen:
                    continue
                if len(variants) >= cfg.max_variants:
                    capped = True
                    continue
                seen.add(text)
                variants.append(Variant(q, v.transforms + (t,)))
    if capped and warnings is not None:
        warnings.append(f"variant cap {cfg.max_variants} reached")
    return variants


def _divisors(n: int, cap: int) -> list[int]:
    return [d for d in range(1, min(n, cap) + 1) if n % d == 0]


def enumerate_pragmas(v: Program, cfg: ExplorerConfig = ExplorerConfig(), params: EstimatorParams | None = None,
                      warnings: list | None = None) -> list[PragmaConfig]:
    params = params or EstimatorParams()
    info = analyze_loops(v)
    labels = [lp.label for lp in _all_loops(v)]
    if not labels:
        return [EMPTY]
    arrays = v.arrays()
    choices = []
    for label in labels:
        n = info[label].trip_count
        opts = []
        for f in _divisors(n, cfg.max_unroll) or [1]:
            opts.append(LoopDirectives(None, f))
            if n > 0:
                opts.append(LoopDirectives(min_legal_ii(v, label, f, params), f))
        choices.append(opts)
    out = []
    total = 1
    for c in choices:
        total *= len(c)
    if total > cfg.max_pragma_sets and warnings is not None:
        warnings.append(f"{total} directive sets for one variant, keeping {cfg.max_pragma_sets}")
    for combo in product(*choices):
        if len(out) >= cfg.max_pragma_sets:
            break
        loops_cfg = dict(zip(labels, combo))
        partition: dict[str, int] = {}
        dep_false = set()
        for label, d in loops_cfg.items():
            facts = info[label]
            touched = facts.read_arrays | facts.written_arrays
            if d.unroll > 1:
                for arr in touched:
                    if arrays[arr][1] % d.unroll == 0:
                        partition[arr] = max(partition.get(arr, 1), d.unroll)
            if d.pipeline_ii is not None:
                both = facts.read_arrays & facts.written_arrays
                dep_false |= both - facts.carried_arrays
        out.append(PragmaConfig.make(loops_cfg, partition, dep_false))
    return out


def program_digest(p: Program) -> str:
    return hashlib.sha256(emit_c(p).encode()).hexdigest()


@dataclass
class DesignPoint:
    id: str
    program: Program
    transforms: tuple
    pragmas: PragmaConfig
    variant: int = 0
    qor: QoR | None = None
    r: float | None = None
    npi: float | None = None

    @property
    def latency(self) -> int:
        return self.qor.latency_cycles

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "transforms": [t.to_json() for t in self.transforms],
            "pragmas": self.pragmas.to_json(),
            "program_digest": program_digest(self.program),
        }


def point_id(variant: int, k: int, prefix: str = "p") -> str:
    return f"v{variant:04d}{prefix}{k:04d}"


def bound_instances(p: Program) -> list[dict]:
    """Bound-parameter values used for equivalence checks: every value up to a small product."""
    if not p.bounds:
        return [{}]
    ranges = [range(b.maximum + 1) for b in p.bounds]
    size = 1
    for r in ranges:
        size *= len(r)
    if size > 64:
        ranges = [sorted({0, b.maximum // 2, b.maximum}) for b in p.bounds]
    return [dict(zip([b.name for b in p.bounds], combo)) for combo in product(*ranges)]


def check_variant(source: Program, v: Program, n_vectors: int, seed: int) -> EquivVerdict:
    verdict = None
    for bounds in bound_instances(source):
        verdict = check_equiv(source, v, n_vectors, seed, bounds or None)
        if not verdict.equivalent:
            return verdict
    return verdict


def synthesize_design_space(variants: list[Variant], pragma_sets: list[list[PragmaConfig]],
                            source: Program | None = None, cfg: ExplorerConfig = ExplorerConfig(),
                            warnings: list | None = None) -> list[DesignPoint]:
    points = []
    for vi, (v, configs) in enumerate(zip(variants, pragma_sets)):
        if source is not None:
            verdict = check_variant(source, v.program, cfg.n_vectors, cfg.seed)
            if not verdict.equivalent:
                msg = f"variant {vi} failed equivalence and was dropped"
                log.error(msg)
                if warnings is not None:
                    warnings.append(msg)
                continue
        for k, pc in enumerate(configs or [EMPTY]):
            points.append(DesignPoint(point_id(vi, k), v.program, v.transforms, pc, vi))
    return points


@dataclass
class DesignSpace:
    """Estimated design points plus what is needed to explore around them."""

    source: Program
    cfg: ExplorerConfig = field(default_factory=ExplorerConfig)
    params: EstimatorParams = field(default_factory=EstimatorParams)
    device: DeviceProfile = field(default_factory=lambda: DEVICES["zu9eg"])
    weights: Weights = field(default_factory=Weights)
    variants: list = field(default_factory=list)
    points: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    _by_key: dict = field(default_factory=dict)
    _extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, source: Program, cfg: ExplorerConfig = ExplorerConfig(), params: EstimatorParams | None = None,
              device: DeviceProfile | None = None, weights: Weights | None = None) -> "DesignSpace":
        ds = cls(source, cfg, params or EstimatorParams(), device or DEVICES["zu9eg"], weights or Weights())
        ds.variants = enumerate_variants(source, cfg, ds.warnings)
        sets = [enumerate_pragmas(v.program, cfg, ds.params, ds.warnings) for v in ds.variants]
        for p in synthesize_design_space(ds.variants, sets, source, cfg, ds.warnings):
            ds.add(p)
        ds.score()
        return ds

    def evaluate(self, p: DesignPoint) -> DesignPoint:
        if p.qor is None:
            p.qor = estimate_program(p.program, p.pragmas, self.params)
            p.r = resource_percent(p.qor, self.device)
        return p

    def add(self, p: DesignPoint) -> DesignPoint:
        key = (p.variant, p.pragmas)
        if key in self._by_key:
            return self._by_key[key]
        self.evaluate(p)
        self._by_key[key] = p
        self.points.append(p)
        return p

    def score(self) -> None:
        ls = [p.latency for p in self.points]
        rs = [p.r for p in self.points]
        for p in self.points:
            p.npi = npi_from(p.latency, p.r, ls, rs, self.weights)

    def neighbors(self, p: DesignPoint) -> list[DesignPoint]:
        """Unroll one divisor step either way, II one step either way, one partition toggled."""
        prog = p.program
        info = analyze_loops(prog)
        configs = []
        for lp in _all_loops(prog):
            d = p.pragmas.loop(lp.label)
            divs = _divisors(info[lp.label].trip_count, self.cfg.max_unroll) or [1]
            k = divs.index(d.unroll) if d.unroll in divs else 0
            for j in (k - 1, k + 1):
                if 0 <= j < len(divs):
                    f = divs[j]
                    ii = d.pipeline_ii
                    if ii is not None:
                        ii = max(ii, min_legal_ii(prog, lp.label, f, self.params))
                    configs.append(p.pragmas.replace_loop(lp.label, LoopDirectives(ii, f)))
            if d.pipeline_ii is not None:
                floor = min_legal_ii(prog, lp.label, d.unroll, self.params)
                for ii in (d.pipeline_ii - 1, d.pipeline_ii + 1):
                    if ii >= floor:
                        configs.append(p.pragmas.replace_loop(lp.label, LoopDirectives(ii, d.unroll)))
        arrays = prog.arrays()
        partition = dict(p.pragmas.partition)
        for arr, (_, length) in sorted(arrays.items()):
            new = dict(partition)
            if arr in new:
                del new[arr]
            else:
                factor = max([p.pragmas.loop(lp.label).unroll for lp in _all_loops(prog)] + [2])
                while factor > 1 and length % factor:
                    factor -= 1
                if factor <= 1:
                    continue
                new[arr] = factor
            configs.append(PragmaConfig.make(dict(p.pragmas.loops), new, p.pragmas.dependence_false))
        out = []
        for pc in configs:
            key = (p.variant, pc)
            if key in self._by_key:
                out.append(self._by_key[key])
                continue
            n = self._extra.get(p.variant, 0)
            self._extra[p.variant] = n + 1
            out.append(DesignPoint(point_id(p.variant, n, "n"), prog, p.transforms, pc, p.variant))
        return out


def design_space_json(ds: DesignSpace, seed: int) -> dict:
    return {"seed": seed, "points": [p.to_json() for p in ds.points]}


def no_branches(p: Program) -> bool:
    return not any(isinstance(s, If) for s in walk_stmts(p.body))
