"""``loopsynth`` command line: roll, explore, check, combine, report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from .egraph import SaturationConfig
from .emit import emit_c
from .explorer.analysis import analyze_loops
from .explorer.space import DesignSpace, ExplorerConfig, design_space_json
from .interp import SignatureMismatch, check_equiv
from .ir import IRError, walk_stmts
from .multikernel import Infeasible, combine_fronts, enumerate_combinations, load_front, select_under_budget
from .parse import load_program
from .qor import EstimatorParams, Weights, hypervolume, load_device, pareto_filter, refine
from .rolling import RollError, roll
from .svg import scatter
from .validate import side_channel_violations

EXIT_OK, EXIT_NOT_EQUIVALENT, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("loopsynth")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _device(args):
    return load_device(args.device)


# -- roll ---------------------------------------------------------------------

def cmd_roll(args) -> int:
    p = load_program(args.input)
    cfg = SaturationConfig(min_sequence_ops=args.min_seq_len)
    try:
        res = roll(p, cfg, n_vectors=args.vectors, seed=args.seed, debug=args.debug)
    except RollError as e:
        print(f"error: {e}", file=sys.stderr)
        if e.verdict is not None:
            print(json.dumps(e.verdict.to_json()), file=sys.stderr)
        return EXIT_NOT_EQUIVALENT
    out = Path(args.output)
    report = dict(res.report, seed=args.seed, input=str(args.input))
    write_atomic(out / "rolled.slc", emit_c(res.program))
    write_atomic(out / "roll_report.json", _json(report))
    if args.dump_ddg:
        write_atomic(out / "ddg.dot", res.ddg.to_dot())
        write_atomic(out / "arrays.json", _json(res.assignment.to_json()))
    if args.dump_templates:
        write_atomic(out / "templates.json", _json([s.to_json() for s in res.sequences]))
    if args.dump_egraph:
        write_atomic(out / "egraph.json", _json(res.saturation.to_json()))
    print(f"statements: {report['statements_before']} -> {report['statements_after']}")
    print(f"loops: {len(report['loops'])}")
    print("verdict: " + ("equivalent" if res.verdict.equivalent else "NOT equivalent"))
    return EXIT_OK


# -- explore ------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def pareto_csv(front: list, seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["design_id", "latency_cycles", "dsp", "lut", "ff", "bram", "r_percent", "npi"])
    for p in front:
        q = p.qor
        w.writerow([p.id, q.latency_cycles, q.dsp, q.lut, q.ff, q.bram, _fmt(p.r), _fmt(p.npi)])
    return buf.getvalue()


def run_explore(p, cfg: ExplorerConfig, params: EstimatorParams, dev, weights: Weights, rounds: int):
    """Build and refine a design space; returns (space, front, hypervolume per round)."""
    ds = DesignSpace.build(p, cfg, params, dev, weights)
    ref = (max(q.latency for q in ds.points), max(q.r for q in ds.points))
    front = pareto_filter(ds.points)
    history = [hypervolume(front, ref)]
    for _ in range(rounds):
        front = refine(front, ds, 1)
        history.append(hypervolume(front, ref))
    ds.score()
    return ds, front, history


def cmd_explore(args) -> int:
    p = load_program(args.input)
    cfg = ExplorerConfig(max_unroll=args.max_unroll, n_vectors=args.vectors, seed=args.seed)
    params = EstimatorParams.load(args.params) if args.params else EstimatorParams()
    dev = _device(args)
    ds, front, history = run_explore(p, cfg, params, dev, Weights.parse(args.weights), args.refine)
    for w in ds.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(args.output)
    meta = design_space_json(ds, args.seed)
    meta["population"] = {"size": len(ds.points), "latency": [min(q.latency for q in ds.points),
                                                              max(q.latency for q in ds.points)],
                          "r_percent": [min(q.r for q in ds.points), max(q.r for q in ds.points)]}
    meta["hypervolume"] = history
    meta["device"] = dev.to_json()
    write_atomic(out / "design_space.json", _json(meta))
    write_atomic(out / "pareto.csv", pareto_csv(front, args.seed))
    write_atomic(out / "pareto.svg", scatter(ds.points, front, p.name))
    best = min(ds.points, key=lambda q: (q.npi, q.latency, q.id))
    write_atomic(out / "best.c", f"// {best.id} seed={args.seed}\n" + emit_c(best.program, best.pragmas))
    print(f"design points: {len(ds.points)}  front: {len(front)}  best: {best.id}")
    return EXIT_OK


# -- check --------------------------------------------------------------------

def cmd_check(args) -> int:
    a, b = load_program(args.left), load_program(args.right)
    bounds = dict(kv.split("=") for kv in args.bound) if args.bound else None
    if bounds:
        bounds = {k: int(v) for k, v in bounds.items()}
    try:
        v = check_equiv(a, b, args.vectors, args.seed, bounds)
    except SignatureMismatch as e:
        print(json.dumps({"equivalent": False, "error": str(e)}))
        return EXIT_USAGE
    print(json.dumps(v.to_json(), sort_keys=True))
    return EXIT_OK if v.equivalent else EXIT_NOT_EQUIVALENT


# -- combine ------------------------------------------------------------------

def cmd_combine(args) -> int:
    dev = _device(args)
    weights = Weights.parse(args.weights)
    fronts = [load_front(f, dev) for f in args.fronts]
    seen: dict[str, int] = {}
    for i, f in enumerate(fronts):
        if f.kernel in seen:
            f.kernel = f"{f.kernel}_{i}"
        seen[f.kernel] = i
    candidates = enumerate_combinations(fronts, dev, w=weights)
    front = combine_fronts(fronts, dev, w=weights)
    result = {
        "seed": args.seed,
        "kernels": [f.kernel for f in fronts],
        "front": [c.to_json() for c in front],
        "mode": args.mode,
        "dsp_budget": args.dsp_budget,
    }
    code = EXIT_OK
    try:
        chosen = select_under_budget(candidates, args.dsp_budget, args.mode, weights)
        result["selected"] = chosen.to_json()
        print(f"selected: latency {chosen.latency}  dsp {chosen.qor.dsp}")
    except Infeasible as e:
        result["infeasible"] = {"witness": e.witness.to_json()}
        print(f"infeasible: {e}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    write_atomic(Path(args.output) / "combined.json", _json(result))
    return code


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    p = load_program(args.input)
    info = analyze_loops(p)
    rep = {
        "kernel": p.name,
        "statements": sum(1 for _ in walk_stmts(p.body)),
        "loops": [f.to_json() for f in info.loops.values()],
        "side_channel": side_channel_violations(p),
    }
    print(_json(rep), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loopsynth", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--vectors", type=int, default=1000)
    common.add_argument("--device", default="zu9eg", help="device name or JSON file")
    common.add_argument("--weights", default="0.5,0.5")
    common.add_argument("-o", "--output", default=".")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("roll", parents=[common], help="re-roll a straight-line kernel")
    r.add_argument("input")
    r.add_argument("--min-seq-len", type=int, default=2)
    r.add_argument("--debug", action="store_true", help="extra soundness checks")
    r.add_argument("--dump-ddg", action="store_true")
    r.add_argument("--dump-templates", action="store_true")
    r.add_argument("--dump-egraph", action="store_true")
    r.set_defaults(fn=cmd_roll)

    e = sub.add_parser("explore", parents=[common], help="enumerate and estimate hardware variants")
    e.add_argument("input")
    e.add_argument("--max-unroll", type=int, default=16)
    e.add_argument("--refine", type=int, default=0)
    e.add_argument("--params", help="estimator table JSON")
    e.set_defaults(fn=cmd_explore)

    c = sub.add_parser("check", parents=[common], help="bit-exact equivalence of two kernels")
    c.add_argument("left")
    c.add_argument("right")
    c.add_argument("--bound", action="append", metavar="NAME=VALUE")
    c.set_defaults(fn=cmd_check)

    m = sub.add_parser("combine", parents=[common], help="combine per-kernel fronts")
    m.add_argument("fronts", nargs="+")
    m.add_argument("--dsp-budget", type=int)
    m.add_argument("--mode", choices=("latency", "npi"), default="latency")
    m.set_defaults(fn=cmd_combine)

    rp = sub.add_parser("report", parents=[common], help="print loop facts for a kernel")
    rp.add_argument("input")
    rp.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except (IRError, SignatureMismatch, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
