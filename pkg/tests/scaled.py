"""Scaled experiments shared by the acceptance checks on the heuristic and on redistribution.

Each seeded instance gets one split K in {2, 3, 4} (cycling with the seed) and
is solved for every plain family three ways: exactly, exactly with deliveries
fixed to zero, and with the rolling-horizon heuristic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from equipshare.evaluation import evaluate_plan
from equipshare.formulation import SolveResult, solve_instance
from equipshare.heuristic import HeuristicError, make_even_split, rolling_horizon_solve
from equipshare.milpcore import OPTIMAL, SolveLimits, ToleranceConfig
from equipshare.objectives import FAMILIES, ModelOptions, Objective

from instances import random_instance

N_INSTANCES = 100
SEED_BASE = 1000
SPLITS = (2, 3, 4)
SIZE = dict(n_max=3, q_min=4, q_max=6, scenarios=3, surplus=True, roomy_storage=True)
TIME_LIMIT = 30.0
K1_EVERY = 10  # instances that also run the heuristic with K = 1


def scaled_instance(n: int):
    return random_instance(SEED_BASE + n, **SIZE)


@dataclass
class FamilyRun:
    family: str
    exact_status: str
    exact_value: Fraction | None  # evaluated value of the exact plan
    without_status: str
    without_value: Fraction | None  # None: no plan without redistribution
    heuristic_value: Fraction | None  # None: a subproblem failed
    heuristic_violations: int
    heuristic_error: str = ""
    k1_value: Fraction | None = None
    h_mismatches: int = 0  # H columns differing from max(0, v), over the exact solves
    objective_gaps: list = field(default_factory=list)  # |solver objective - evaluated value|


@dataclass
class InstanceRun:
    index: int
    K: int
    nodes: int
    periods: int
    runs: list[FamilyRun] = field(default_factory=list)
    seconds: float = 0.0


def h_mismatches(res: SolveResult, tol: Fraction = Fraction(1, 10**6)) -> int:
    """Count H columns that differ from the recomputed max(0, v) of the returned plan by more than ``tol``."""
    if res.plan is None:
        return 0
    cm = res.compiled
    rep = evaluate_plan(cm.instance, res.plan, cm.options, res.baselines_by_family())
    names = cm.model.var_names
    bad = 0
    for (i, t, w), c in cm.index.H.items():
        got = Fraction(res.solution.values[names[c]])
        if abs(got - rep.H[(i, t, w)]) > tol:
            bad += 1
    return bad


def objective_gap(res: SolveResult) -> Fraction:
    cm = res.compiled
    rep = evaluate_plan(cm.instance, res.plan, cm.options, res.baselines_by_family())
    return abs(Fraction(res.objective) - rep.objectives[cm.objective.label])


def run_instance(n: int, mode: str = "float") -> InstanceRun:
    start = time.perf_counter()
    inst = scaled_instance(n)
    K = SPLITS[n % len(SPLITS)]
    limits, tol = SolveLimits(TIME_LIMIT), ToleranceConfig(mode)
    with_opts, without_opts = ModelOptions(), ModelOptions(no_redistribution=True)
    out = InstanceRun(n, K, len(inst.node_ids), inst.horizon)
    for family in FAMILIES:
        obj = Objective(family)
        exact = solve_instance(inst, obj, with_opts, limits, tol)
        without = solve_instance(inst, obj, without_opts, limits, tol)
        try:
            plan, _diag = rolling_horizon_solve(inst, obj, make_even_split(inst.horizon, K), with_opts, limits, tol)
        except HeuristicError as exc:
            plan, error = None, str(exc)
        else:
            error = ""
        heur = None if plan is None else evaluate_plan(inst, plan, with_opts)
        run = FamilyRun(
            family,
            exact.status,
            None if exact.plan is None else evaluate_plan(inst, exact.plan, with_opts).objectives[family],
            without.status,
            None if without.plan is None else evaluate_plan(inst, without.plan, without_opts).objectives[family],
            None if heur is None else heur.objectives[family],
            0 if heur is None else len(heur.violations),
            error,
        )
        if n % K1_EVERY == 0:
            plan1, _ = rolling_horizon_solve(inst, obj, make_even_split(inst.horizon, 1), with_opts, limits, tol)
            run.k1_value = evaluate_plan(inst, plan1, with_opts).objectives[family]
        for res in (exact, without):
            if res.status == OPTIMAL:
                run.h_mismatches += h_mismatches(res)
                run.objective_gaps.append(objective_gap(res))
        out.runs.append(run)
    out.seconds = time.perf_counter() - start
    return out


def run_all(count: int = N_INSTANCES, mode: str = "float", progress=None) -> list[InstanceRun]:
    runs = []
    for n in range(count):
        r = run_instance(n, mode)
        if progress:
            progress(r)
        runs.append(r)
    return runs
