"""Synthesis directive configuration attached to a structured program."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LoopDirectives:
    pipeline_ii: int | None = None
    unroll: int = 1

    def to_json(self) -> dict:
        d: dict = {}
        if self.pipeline_ii is not None:
            d["pipeline_ii"] = self.pipeline_ii
        if self.unroll != 1:
            d["unroll"] = self.unroll
        return d


NO_DIRECTIVES = LoopDirectives()


@dataclass(frozen=True)
class PragmaConfig:
    """Directives keyed by loop label and array name.

    Stored as sorted tuples so configurations hash and compare structurally.
    """

    loops: tuple = ()  # ((label, LoopDirectives), ...)
    partition: tuple = ()  # ((array, cyclic factor), ...)
    dependence_false: tuple = ()  # (array, ...)

    @classmethod
    def make(cls, loops: dict | None = None, partition: dict | None = None,
             dependence_false=()) -> "PragmaConfig":
        loops = {k: v for k, v in (loops or {}).items() if v != NO_DIRECTIVES}
        partition = {k: v for k, v in (partition or {}).items() if v > 1}
        return cls(tuple(sorted(loops.items())), tuple(sorted(partition.items())),
                   tuple(sorted(set(dependence_false))))

    def loop(self, label: str) -> LoopDirectives:
        for k, v in self.loops:
            if k == label:
                return v
        return NO_DIRECTIVES

    def partition_factor(self, array: str) -> int:
        for k, v in self.partition:
            if k == array:
                return v
        return 1

    @property
    def is_empty(self) -> bool:
        return not (self.loops or self.partition or self.dependence_false)

    def replace_loop(self, label: str, directives: LoopDirectives) -> "PragmaConfig":
        loops = dict(self.loops)
        loops[label] = directives
        return PragmaConfig.make(loops, dict(self.partition), self.dependence_false)

    def to_json(self) -> dict:
        return {
            "loops": {k: v.to_json() for k, v in self.loops},
            "partition": dict(self.partition),
            "dependence_false": list(self.dependence_false),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PragmaConfig":
        loops = {k: LoopDirectives(v.get("pipeline_ii"), v.get("unroll", 1)) for k, v in d.get("loops", {}).items()}
        return cls.make(loops, d.get("partition", {}), d.get("dependence_false", ()))


EMPTY = PragmaConfig()
