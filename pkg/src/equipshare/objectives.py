"""Objective criteria and model-variant switches shared by compiler and evaluator."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

PHI1, PHI2, PHI3, PHI4 = "phi1", "phi2", "phi3", "phi4"
FAMILIES = (PHI1, PHI2, PHI3, PHI4)

EQUALITY, AT_MOST = "equality", "at-most"


@dataclass(frozen=True)
class Objective:
    family: str
    regret: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown objective family {self.family!r}")

    @property
    def label(self) -> str:
        return f"{self.family}-regret" if self.regret else self.family

    @classmethod
    def parse(cls, text: str) -> "Objective":
        text = text.strip().lower()
        if text.endswith("-regret"):
            return cls(text[: -len("-regret")], True)
        return cls(text)


ALL_OBJECTIVES = tuple(Objective(f, r) for r in (False, True) for f in FAMILIES)


@dataclass(frozen=True)
class ModelOptions:
    """Switches for the readings the model leaves open.

    c4_mode: extra stock must be shared completely ("equality") or at most ("at-most").
    c5_exempt: units allowed to receive and deliver in the same period.
    no_redistribution: all deliveries fixed to zero (sharing stays free).
    arrive_in_horizon: deliveries must arrive within the modelled periods.
        Used by rolling-horizon subproblems so that no shipment lands in a
        period whose storage limit the subproblem cannot see.
    """

    c4_mode: str = EQUALITY
    c5_exempt: frozenset = field(default_factory=frozenset)
    no_redistribution: bool = False
    arrive_in_horizon: bool = False

    def __post_init__(self):
        if self.c4_mode not in (EQUALITY, AT_MOST):
            raise ValueError(f"unknown C4 mode {self.c4_mode!r}")
        object.__setattr__(self, "c5_exempt", frozenset(self.c5_exempt))


def family_value(family: str, ncdp: Mapping, nodes: Sequence[int], periods: Sequence[int], probs: Mapping[str, Fraction], partition=()):
    """Criterion value from positive non-covered demands ncdp[(i, t, w)] with scenario weights ``probs``."""
    if family == PHI1:
        return max(sum(p * sum(ncdp[(i, t, w)] for t in periods) for w, p in probs.items()) for i in nodes)
    if family == PHI2:
        return max(sum(p * ncdp[(i, t, w)] for w, p in probs.items()) for i in nodes for t in periods)
    if family == PHI3:
        if not partition:
            raise ValueError("phi3 needs a fairness partition")
        return max(
            sum(p * sum(ncdp[(i, t, w)] for i in sorted(group) for t in periods) for w, p in probs.items())
            for group in partition
        )
    return sum(p * sum(ncdp[(i, t, w)] for i in nodes for t in periods) for w, p in probs.items())
