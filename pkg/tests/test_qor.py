import math
import random
from dataclasses import dataclass

import pytest
from hypothesis import given, settings, strategies as st

from loopsynth.explorer.space import DesignSpace, ExplorerConfig
from loopsynth.parse import parse_program
from loopsynth.pragmas import LoopDirectives, PragmaConfig
from loopsynth.qor import (
    DEVICES, DeviceProfile, EstimatorError, EstimatorParams, QoR, Weights, estimate_program, hypervolume,
    min_legal_ii, npi, npi_from, pareto_filter, refine, resource_percent,
)

DEV = DEVICES["zu9eg"]
TOL = 1e-12


def k(body, params="const u64 a[16], const u64 b[16], const u64 c[1], u64 t[16], u64 o[16]"):
    return parse_program(f"void k({params}) {{ {body} }}")


def loop_cfg(label, ii=None, unroll=1):
    return PragmaConfig.make({label: LoopDirectives(ii, unroll)})


def test_pipelined_formula():
    p = k("L: for (int v = 0; v < 10; v++) { t[v] = a[v] * c[0] + b[v] + 1; }")
    # body: mul 4 + add 1 + add 1 = 6 cycles
    assert estimate_program(p).latency_cycles == 10 * 6
    assert estimate_program(p, loop_cfg("L", 1)).latency_cycles == 1 * 9 + 6


def test_unrolled_dsp():
    p = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v] * c[0]; }")
    assert estimate_program(p).dsp == 12
    assert estimate_program(p, loop_cfg("L", None, 4)).dsp == 4 * 12


def test_empty_program():
    assert estimate_program(k("")) == QoR(0, 0, 0, 0, 0)


def test_recurrence_ii():
    p = k("L: for (int v = 1; v < 8; v++) { t[v] = t[v - 1] * a[v]; }")
    assert min_legal_ii(p, "L", 1, EstimatorParams()) == 4
    q = estimate_program(p, loop_cfg("L", 1))
    assert q.latency_cycles == 4 * 6 + 4


def test_bram_partition():
    p = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v]; }", "const u64 a[1024], u64 t[8]")
    base = estimate_program(p).bram
    assert base == math.ceil(64 * 1024 / 18432) + 1
    part = estimate_program(p, PragmaConfig.make({}, {"a": 4})).bram
    assert part == 4 * math.ceil(64 * 1024 / 18432) + 1


def test_missing_table_entry():
    p = k("L: for (int v = 0; v < 8; v++) { t[v] = a[v] + 1; }")
    with pytest.raises(EstimatorError):
        estimate_program(p, params=EstimatorParams(latency={}))


def test_params_json_override(tmp_path):
    path = tmp_path / "params.json"
    path.write_text('{"latency": {"mul_u64": 7}}')
    p = k("L: for (int v = 0; v < 2; v++) { t[v] = a[v] * c[0]; }")
    assert estimate_program(p, params=EstimatorParams.load(path)).latency_cycles == 14


def test_unroll_monotone():
    p = k("L: for (int v = 0; v < 16; v++) { t[v] = a[v] * c[0] + b[v]; }")
    for ii in (None, 1):
        qs = [estimate_program(p, loop_cfg("L", ii, f)) for f in (1, 2, 4, 8, 16)]
        for x, y in zip(qs, qs[1:]):
            assert y.latency_cycles <= x.latency_cycles and y.dsp >= x.dsp


def test_estimate_deterministic():
    p = k("L: for (int v = 0; v < 16; v++) { t[v] = a[v] * c[0] + b[v]; }")
    assert estimate_program(p, loop_cfg("L", 1, 2)) == estimate_program(p, loop_cfg("L", 1, 2))


# -- resource percentage and NPI ---------------------------------------------------

def test_resource_percent_quarter():
    q = QoR(0, DEV.dsp_total // 4, DEV.lut_total // 4, DEV.ff_total // 4, DEV.bram_total // 4)
    assert abs(resource_percent(q, DEV) - 25.0) <= TOL


def test_resource_percent_ends():
    assert resource_percent(QoR(), DEV) == 0.0
    full = QoR(1, DEV.dsp_total, DEV.lut_total, DEV.ff_total, DEV.bram_total)
    assert abs(resource_percent(full, DEV) - 100.0) <= TOL


def test_npi_examples():
    assert npi_from(100, 10, [100, 200], [5, 10]) == pytest.approx(0.5, abs=TOL)
    assert npi_from(200, 5, [100, 200], [5, 10]) == pytest.approx(0.5, abs=TOL)
    assert npi_from(100, 5, [100, 200], [5, 10]) == 0.0
    assert npi_from(200, 10, [100, 200], [5, 10]) == pytest.approx(1.0, abs=TOL)


def test_npi_degenerate_population():
    assert npi_from(5, 3, [5, 5], [3, 3]) == 0.0


def test_npi_on_qor():
    pop = [QoR(100, 10), QoR(200, 0)]
    assert npi(pop[0], pop, DEV) == pytest.approx(0.5, abs=TOL)


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(0.7, 0.7)
    assert Weights.parse("0.25,0.75") == Weights(0.25, 0.75)


@given(st.lists(st.tuples(st.integers(0, 10**6), st.floats(0, 100)), min_size=1, max_size=30),
       st.floats(0.01, 1000), st.integers(-1000, 1000))
@settings(max_examples=200, deadline=None)
def test_npi_affine_invariance(pop, a, b):
    ls = [x for x, _ in pop]
    rs = [y for _, y in pop]
    ls2 = [a * x + b for x in ls]
    for (l, r), l2 in zip(pop, ls2):
        v1 = npi_from(l, r, ls, rs)
        v2 = npi_from(l2, r, ls2, rs)
        assert abs(v1 - v2) <= 1e-12
        assert -TOL <= v1 <= 1 + TOL


# -- Pareto ---------------------------------------------------------------------

@dataclass
class P:
    id: str
    latency: float
    r: float


def brute_front(points):
    keep = []
    for p in points:
        if any(q.latency <= p.latency and q.r <= p.r and (q.latency < p.latency or q.r < p.r) for q in points):
            continue
        if any(q.latency == p.latency and q.r == p.r and q.id < p.id for q in points):
            continue
        keep.append(p)
    return sorted(keep, key=lambda p: (p.latency, p.r, p.id))


def test_pareto_example():
    pts = [P("a", 10, 5), P("b", 5, 10), P("c", 7, 7), P("d", 10, 10)]
    assert {p.id for p in pareto_filter(pts)} == {"a", "b", "c"}
    assert pareto_filter([pts[0]]) == [pts[0]]


def test_pareto_duplicates_keep_lowest_id():
    assert [p.id for p in pareto_filter([P("z", 1, 1), P("b", 1, 1), P("m", 1, 1)])] == ["b"]


def test_pareto_random():
    rng = random.Random(0)
    for _ in range(100):
        pts = [P(f"p{i:03d}", rng.randint(0, 30), rng.randint(0, 30)) for i in range(rng.randint(1, 200))]
        assert pareto_filter(pts) == brute_front(pts)


def test_hypervolume_rectangles():
    front = [P("a", 1, 3), P("b", 2, 1)]
    # union of [1,4]x[3,4] and [2,4]x[1,4]
    assert hypervolume(front, (4, 4)) == pytest.approx(3 + 6 - 2)
    assert hypervolume([], (4, 4)) == 0.0


# -- refine ---------------------------------------------------------------------

class Stub:
    """Explorer whose neighbours are fixed per point id."""

    def __init__(self, table):
        self.table = table

    def neighbors(self, p):
        return self.table.get(p.id, [])

    def add(self, p):
        return p


def test_refine_zero_rounds():
    front = [P("a", 1, 2)]
    assert refine(front, Stub({"a": [P("b", 0, 0)]}), 0) == front


def test_refine_replaces_dominated():
    front = [P("a", 10, 5), P("b", 5, 10)]
    better = P("n", 4, 9)
    out = refine(front, Stub({"b": [better]}), 1)
    assert [p.id for p in out] == ["n", "a"]


def test_refine_never_shrinks_hypervolume():
    src = k("L: for (int v = 0; v < 8; v++) { o[0] = o[0] + a[v] * b[v]; } "
            "M: for (int v = 0; v < 16; v++) { t[v] = a[v] * c[0]; }")
    ds = DesignSpace.build(src, ExplorerConfig(max_unroll=4, max_pragma_sets=6, tile_factors=()))
    ref = (max(p.latency for p in ds.points), max(p.r for p in ds.points))
    front = pareto_filter(ds.points)
    hv = [hypervolume(front, ref)]
    for _ in range(3):
        new = refine(front, ds, 1)
        for p in front:
            assert any(q.latency <= p.latency and q.r <= p.r for q in new)
        front = new
        hv.append(hypervolume(front, ref))
    assert hv == sorted(hv)
    assert hv[-1] > hv[0]


def test_device_validation():
    with pytest.raises(ValueError):
        DeviceProfile("x", 0, 1, 1, 1)
