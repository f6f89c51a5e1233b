"""Joint deployment of several kernels: resources add up, latency is the slowest kernel."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path

from .qor import DEVICES, DeviceProfile, QoR, Weights, npi_from, pareto_filter, resource_percent

DEFAULT_LIMIT = 10**6
DEFAULT_PRUNE_K = 16


class Infeasible(Exception):
    """No combined design fits the DSP budget; ``witness`` uses the fewest DSPs."""

    def __init__(self, budget: int, witness: "CombinedDesign"):
        super().__init__(f"no design fits {budget} DSP; the smallest needs {witness.qor.dsp}")
        self.budget = budget
        self.witness = witness


@dataclass(frozen=True)
class KernelPoint:
    id: str
    qor: QoR
    r: float
    npi: float | None = None

    @property
    def latency(self) -> int:
        return self.qor.latency_cycles


@dataclass
class KernelFront:
    kernel: str
    points: list

    def __post_init__(self):
        if not self.points:
            raise ValueError(f"empty front for kernel {self.kernel}")


@dataclass(frozen=True)
class CombinedDesign:
    selection: tuple  # ((kernel, point id), ...)
    qor: QoR
    r: float

    @property
    def id(self) -> str:
        return "+".join(pid for _, pid in self.selection)

    @property
    def latency(self) -> int:
        return self.qor.latency_cycles

    def to_json(self) -> dict:
        return {
            "selection": {k: pid for k, pid in self.selection},
            "qor": self.qor.to_json(),
            "r_percent": self.r,
        }


def combine_qor(qs) -> QoR:
    qs = list(qs)
    return QoR(
        max(q.latency_cycles for q in qs),
        sum(q.dsp for q in qs), sum(q.lut for q in qs), sum(q.ff for q in qs), sum(q.bram for q in qs),
    )


def prune(front: KernelFront, k: int, dev: DeviceProfile, w: Weights = Weights()) -> KernelFront:
    """Keep the ``k`` points with the lowest NPI within this front."""
    ls = [p.latency for p in front.points]
    rs = [p.r for p in front.points]
    ranked = sorted(front.points, key=lambda p: (npi_from(p.latency, p.r, ls, rs, w), p.id))
    return KernelFront(front.kernel, ranked[:k])


def enumerate_combinations(fronts: list, dev: DeviceProfile | None = None, limit: int = DEFAULT_LIMIT,
                           k: int = DEFAULT_PRUNE_K, w: Weights = Weights()) -> list:
    """Every selection of one point per kernel, pre-pruning fronts when there are too many."""
    if not fronts:
        raise ValueError("need at least one front")
    dev = dev or DEVICES["zu9eg"]
    if math.prod(len(f.points) for f in fronts) > limit:
        fronts = [prune(f, k, dev, w) for f in fronts]
    out = []
    for combo in product(*(f.points for f in fronts)):
        q = combine_qor(p.qor for p in combo)
        sel = tuple((f.kernel, p.id) for f, p in zip(fronts, combo))
        out.append(CombinedDesign(sel, q, resource_percent(q, dev)))
    return out


def combine_fronts(fronts: list, dev: DeviceProfile | None = None, limit: int = DEFAULT_LIMIT,
                   k: int = DEFAULT_PRUNE_K, w: Weights = Weights()) -> list:
    return pareto_filter(enumerate_combinations(fronts, dev, limit, k, w))


def select_under_budget(combined: list, dsp_budget: int | None, mode: str = "latency",
                        w: Weights = Weights()) -> CombinedDesign:
    if not combined:
        raise ValueError("no combined designs")
    if mode not in ("latency", "npi"):
        raise ValueError(f"unknown mode {mode!r}")
    fits = [c for c in combined if dsp_budget is None or c.qor.dsp <= dsp_budget]
    if not fits:
        raise Infeasible(dsp_budget, min(combined, key=lambda c: (c.qor.dsp, c.latency, c.id)))
    if mode == "latency":
        return min(fits, key=lambda c: (c.latency, c.qor.dsp, c.id))
    ls = [c.latency for c in combined]
    rs = [c.r for c in combined]
    return min(fits, key=lambda c: (npi_from(c.latency, c.r, ls, rs, w), c.latency, c.id))


def load_front(path: str | Path, dev: DeviceProfile | None = None) -> KernelFront:
    """Read a ``pareto.csv`` (comment lines skipped) or a JSON front file."""
    dev = dev or DEVICES["zu9eg"]
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        d = json.loads(text)
        rows = d["points"]
        kernel = d.get("kernel", path.stem)
    else:
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rows = list(csv.DictReader(lines))
        kernel = path.parent.name if path.stem == "pareto" else path.stem
    pts = []
    for row in rows:
        q = QoR(int(row["latency_cycles"]), int(row["dsp"]), int(row.get("lut", 0)),
                int(row.get("ff", 0)), int(row.get("bram", 0)))
        pts.append(KernelPoint(str(row["design_id"]), q, resource_percent(q, dev)))
    return KernelFront(kernel, pts)
