"""End-to-end loop re-rolling of a straight-line kernel."""
from __future__ import annotations

from dataclasses import dataclass, field

from .dataflow import DDG, ArrayAssignment, assign_arrays, build_ddg
from .egraph import (
    Saturation, SaturationConfig, Seq, expand, extract_best, lower_to_loops, saturate, select_targets,
    term_cost, to_term,
)
from .interp import EquivVerdict, check_equiv, unroll
from .ir import IRError, Program, loops
from .templates import AbstractSequence, abstract_program, canonicalize, templates_of
from .validate import validate_straight_line


class RollError(Exception):
    """Raised when the re-rolled program is not equivalent to its input."""

    def __init__(self, message: str, verdict: EquivVerdict | None = None):
        super().__init__(message)
        self.verdict = verdict


@dataclass
class RollResult:
    program: Program
    verdict: EquivVerdict
    ddg: DDG
    assignment: ArrayAssignment
    sequences: list[AbstractSequence]
    saturation: Saturation
    term: Seq
    initial_term: Seq
    report: dict = field(default_factory=dict)


def roll(p: Program, cfg: SaturationConfig = SaturationConfig(), n_vectors: int = 1000, seed: int = 0,
         debug: bool = False) -> RollResult:
    problems = validate_straight_line(p)
    if problems:
        raise IRError("input is not straight-line: " + "; ".join(problems))
    g = build_ddg(p)
    arrays, assignment = assign_arrays(p, g)
    seqs = select_targets(abstract_program(arrays), cfg)
    start = to_term(seqs)
    sat = saturate(start, cfg, debug=debug)
    best = extract_best(sat)
    if expand(best) != expand(start):
        raise RollError("extracted term does not unroll to the input statements")
    out = lower_to_loops(best, templates_of(seqs), arrays)
    if debug:
        flat = unroll(out)
        if [canonicalize(s) for s in flat.body] != [canonicalize(s) for s in arrays.body]:
            raise RollError("lowered loops do not unroll to the abstracted statements")
    verdict = check_equiv(p, out, n_vectors, seed)
    if not verdict.equivalent:
        raise RollError("re-rolled program is not equivalent to the input", verdict)
    report = {
        "statements_before": len(p.body),
        "statements_after": len(out.body),
        "loops": [{"label": lp.label, "trip_count": lp.trip_count()} for lp in loops(out.body)],
        "cost_before": term_cost(start),
        "cost_after": term_cost(best),
        "egraph": sat.to_json(),
        "verdict": verdict.to_json(),
    }
    return RollResult(out, verdict, g, assignment, seqs, sat, best, start, report)
