"""Rolling-horizon math-heuristic: solve overlapping sub-horizons in sequence and glue the plans.

Subperiod k covers T_k = {t_(k-1), ..., t_k - 1}; its model also includes the
boundary period t_k (T_k+), whose decisions are discarded and re-made by the
next subproblem. Breakpoints are stored with the sentinel t_K = q + 1 so that
every T_k, including the last, follows the same rule.

Every subproblem but the last only dispatches shipments that arrive within
T_k+, so goods never land in a later period whose storage limit went unchecked.
With one-period lead times only the discarded boundary decisions are affected.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

from .evaluation import evaluate_plan
from .formulation import SolveResult, solve_instance
from .instance import ExtraStockSchedule, Instance, ScenarioSet
from .milpcore import OPTIMAL, SolveLimits, ToleranceConfig
from .objectives import ModelOptions, Objective
from .plan import Plan

log = logging.getLogger(__name__)


class HeuristicError(RuntimeError):
    def __init__(self, k: int, message: str):
        super().__init__(f"subproblem {k}: {message}")
        self.k = k


@dataclass(frozen=True)
class HorizonSplit:
    breakpoints: tuple[int, ...]  # 1 = t_0 < t_1 < ... < t_K = q + 1

    def __post_init__(self):
        bp = tuple(int(b) for b in self.breakpoints)
        if len(bp) < 2 or bp[0] != 1:
            raise ValueError("breakpoints must start at 1 and define at least one subperiod")
        if any(a >= b for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def horizon(self) -> int:
        return self.breakpoints[-1] - 1

    @property
    def K(self) -> int:
        return len(self.breakpoints) - 1

    def subperiod(self, k: int) -> list[int]:
        """T_k for k = 1..K."""
        return list(range(self.breakpoints[k - 1], self.breakpoints[k]))

    def extended(self, k: int) -> list[int]:
        """T_k+ = T_k plus the next subperiod's first period (T_K+ = T_K)."""
        per = self.subperiod(k)
        return per + [self.breakpoints[k]] if k < self.K else per

    def lengths(self) -> list[int]:
        return [b - a for a, b in zip(self.breakpoints, self.breakpoints[1:])]


def make_even_split(q: int, K: int) -> HorizonSplit:
    """Near-equal subperiods; the first q mod K of them are one period longer."""
    if not 1 <= K <= q:
        raise ValueError(f"need 1 <= K <= q, got K={K}, q={q}")
    base, extra = divmod(q, K)
    bp = [1]
    for k in range(K):
        bp.append(bp[-1] + base + (1 if k < extra else 0))
    return HorizonSplit(tuple(bp))


def split_from_lengths(lengths: Sequence[int]) -> HorizonSplit:
    bp = [1]
    for n in lengths:
        bp.append(bp[-1] + int(n))
    return HorizonSplit(tuple(bp))


@dataclass
class SubproblemRecord:
    k: int
    periods: list[int]
    status: str
    objective: object
    seconds: float
    carry_over: dict[int, int]

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "periods": self.periods,
            "status": self.status,
            "objective": None if self.objective is None else str(self.objective),
            "seconds": round(self.seconds, 6),
            "carry_over": {str(i): v for i, v in sorted(self.carry_over.items())},
        }


@dataclass
class HeuristicDiagnostics:
    split: HorizonSplit
    subproblems: list[SubproblemRecord] = field(default_factory=list)

    @property
    def all_optimal(self) -> bool:
        return all(r.status == OPTIMAL for r in self.subproblems)

    def to_json(self) -> str:
        doc = {
            "breakpoints": list(self.split.breakpoints),
            "subproblems": [r.as_dict() for r in self.subproblems],
        }
        return json.dumps(doc, indent=2) + "\n"


def boundary_state(inst: Instance, prefix: Plan, start: int) -> tuple[dict[int, int], dict[tuple[int, int], int]]:
    """Carry-over stock at ``start`` and later arrivals of shipments already dispatched.

    Carry-over is S + R - D(start - 1) from the prefix plan (which has no
    decisions at or after ``start``); arrivals after ``start`` come back as
    exogenous receipts keyed by global period.
    """
    rep_periods = start - 1
    carry: dict[int, int] = {}
    for i in inst.node_ids:
        held = inst.profile.initial_stock[i]
        held += sum(v for (ii, _k, t), v in prefix.s.items() if ii == i and t <= start)
        held += sum(v for (ii, t), v in inst.receipts.items() if ii == i and t <= start)
        held -= sum(v for (ii, _j, t), v in prefix.x.items() if ii == i and t <= rep_periods)
        carry[i] = held
    later: dict[tuple[int, int], int] = {}
    for (i, j, t), v in prefix.x.items():
        arrival = t + inst.reach.lag(i, j)
        if arrival <= start:
            carry[j] += v
        elif arrival <= inst.horizon:
            later[(j, arrival)] = later.get((j, arrival), 0) + v
    for i, v in carry.items():
        if v < 0:
            raise AssertionError(f"negative carry-over {v} at node {i}")
    return carry, later


def sub_instance(inst: Instance, periods: list[int], carry: dict[int, int], in_flight: dict, boundary: int | None) -> Instance:
    """Instance over ``periods`` renumbered from 1.

    Extra stock of the boundary period is left to the next subproblem, which
    owns that period's decisions.
    """
    first = periods[0]
    shift = first - 1
    demand = {
        (i, t - shift, w): v for (i, t, w), v in inst.scenarios.demand.items() if t in set(periods)
    }
    scen = ScenarioSet(inst.scenarios.names, inst.scenarios.probabilities, demand)
    extra = {
        (k, t - shift): v
        for (k, t), v in inst.extra.amounts.items()
        if t in set(periods) and t != boundary and v > 0
    }
    receipts: dict[tuple[int, int], int] = {}
    for (i, t), v in inst.receipts.items():
        if first < t <= periods[-1]:
            receipts[(i, t - shift)] = receipts.get((i, t - shift), 0) + v
    for (i, t), v in in_flight.items():
        if first < t <= periods[-1]:
            receipts[(i, t - shift)] = receipts.get((i, t - shift), 0) + v
    profile = inst.profile.with_initial_stock(carry)
    return replace(
        inst,
        horizon=len(periods),
        profile=profile,
        extra=ExtraStockSchedule(extra),
        scenarios=scen,
        receipts=receipts,
    )


def rolling_horizon_solve(
    inst: Instance,
    obj: Objective,
    split: HorizonSplit,
    options: ModelOptions | None = None,
    limits: SolveLimits | None = None,
    tol: ToleranceConfig | None = None,
    external=None,
) -> tuple[Plan, HeuristicDiagnostics]:
    if split.horizon != inst.horizon:
        raise ValueError(f"split covers {split.horizon} periods, instance has {inst.horizon}")
    options = options or ModelOptions()
    diag = HeuristicDiagnostics(split)
    if split.K == 1:
        start = time.perf_counter()
        res = solve_instance(inst, obj, options, limits, tol, external)
        _require_plan(res, 1)
        diag.subproblems.append(
            SubproblemRecord(1, list(inst.periods), res.status, res.objective, time.perf_counter() - start, dict(inst.profile.initial_stock))
        )
        return res.plan, diag

    glued = Plan()
    for k in range(1, split.K + 1):
        start = time.perf_counter()
        periods = split.extended(k)
        first = periods[0]
        carry, in_flight = boundary_state(inst, glued, first)
        sub = sub_instance(inst, periods, carry, in_flight, split.breakpoints[k] if k < split.K else None)
        # an arrival after T_k+ would land where this subproblem cannot check storage limits
        sub_options = replace(options, arrive_in_horizon=True) if k < split.K else options
        res = solve_instance(sub, obj, sub_options, limits, tol, external)
        _require_plan(res, k)
        keep = len(split.subperiod(k))
        frozen = res.plan.restricted(range(1, keep + 1)).shifted(first - 1)
        glued = glued.merged(frozen)
        diag.subproblems.append(SubproblemRecord(k, periods, res.status, res.objective, time.perf_counter() - start, carry))
        log.info("subproblem %d/%d periods %s: %s %s", k, split.K, periods, res.status, res.objective)
    return glued, diag


def _require_plan(res: SolveResult, k: int) -> None:
    if res.plan is None:
        raise HeuristicError(k, f"no feasible plan (status {res.status})")


def heuristic_report(inst: Instance, plan: Plan, options: ModelOptions | None = None, baselines=None):
    """Feasibility check of a glued plan on the full horizon."""
    return evaluate_plan(inst, plan, options, baselines)
