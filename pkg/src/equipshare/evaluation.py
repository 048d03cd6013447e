"""Solver-independent recomputation of a plan's consequences, feasibility and criteria."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .instance import Instance
from .objectives import ALL_OBJECTIVES, AT_MOST, FAMILIES, PHI3, ModelOptions, Objective, family_value
from .plan import Plan
from .rational import decimal_str


@dataclass(frozen=True)
class Violation:
    constraint: str
    i: int
    t: int
    scenario: str | None
    slack: Fraction  # negative: amount by which the constraint is violated

    def as_dict(self) -> dict:
        return {
            "constraint": self.constraint,
            "i": self.i,
            "t": self.t,
            "scenario": self.scenario,
            "slack": decimal_str(self.slack),
        }


@dataclass
class EvaluationReport:
    horizon: int
    nodes: list[int]
    scenarios: tuple[str, ...]
    S: dict = field(default_factory=dict)  # (i, t)
    R: dict = field(default_factory=dict)  # (i, t), includes exogenous receipts
    D: dict = field(default_factory=dict)  # (i, t)
    available: dict = field(default_factory=dict)  # (i, t, w): S + R - D(t-1) - d
    H: dict = field(default_factory=dict)
    NCD: dict = field(default_factory=dict)
    NCDp: dict = field(default_factory=dict)
    on_hand: dict = field(default_factory=dict)  # (i, t, w): max(0, -NCD)
    ncd_total: dict = field(default_factory=dict)  # (t, w)
    stock_total: dict = field(default_factory=dict)  # (t, w): sum of H
    on_hand_total: dict = field(default_factory=dict)
    shared: dict = field(default_factory=dict)  # (k, t)
    redistributed: dict = field(default_factory=dict)  # t
    objectives: dict = field(default_factory=dict)  # label -> value (None when undefined)
    scenario_values: dict = field(default_factory=dict)  # family -> {w: value}
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def objective(self, obj: Objective):
        return self.objectives[obj.label]

    def to_json(self) -> str:
        doc = {
            "feasible": self.feasible,
            "violations": [v.as_dict() for v in self.violations],
            "objectives": {k: (None if v is None else decimal_str(v)) for k, v in self.objectives.items()},
            "scenario_values": {
                fam: {w: decimal_str(v) for w, v in vals.items()} for fam, vals in self.scenario_values.items()
            },
        }
        return json.dumps(doc, indent=2) + "\n"


def _check_plan_indices(inst: Instance, plan: Plan) -> None:
    regions = inst.network.regions
    for (i, j, t) in plan.x:
        if (i, j) not in inst.reach.pairs:
            raise ValueError(f"plan ships {i}->{j} but that pair is not reachable")
        if not 1 <= t <= inst.horizon:
            raise ValueError(f"plan delivery at period {t} outside the horizon")
    for (i, k, t) in plan.s:
        if not 1 <= k <= len(regions) or i not in regions[k - 1]:
            raise ValueError(f"plan shares region {k} stock with node {i}, which is not a member")
        if not 1 <= t <= inst.horizon:
            raise ValueError(f"plan share at period {t} outside the horizon")


def evaluate_plan(
    inst: Instance,
    plan: Plan,
    options: ModelOptions | None = None,
    baselines: Mapping[str, Mapping[str, Fraction]] | None = None,
) -> EvaluationReport:
    """Recompute every derived quantity from (x, s) and check the six constraint families
    (plus, under ``no_redistribution``, any delivery at all).

    ``baselines`` maps family -> {scenario: best single-scenario value}; regret
    criteria are reported as None for families without baselines.
    """
    options = options or ModelOptions()
    _check_plan_indices(inst, plan)
    nodes = inst.node_ids
    periods = list(inst.periods)
    names = inst.scenarios.names
    prof = inst.profile
    rep = EvaluationReport(inst.horizon, nodes, names)
    out_x: dict[tuple[int, int], int] = {}
    for (i, j, t), v in plan.x.items():
        out_x[(i, t)] = out_x.get((i, t), 0) + v
    arrive: dict[tuple[int, int], int] = {}
    for (i, j, t), v in plan.x.items():
        # arrival test t' + l <= t; a shipment reaching after the horizon is never received
        ta = t + inst.reach.lag(i, j)
        arrive[(j, ta)] = arrive.get((j, ta), 0) + v
    share_in: dict[tuple[int, int], int] = {}
    for (i, k, t), v in plan.s.items():
        share_in[(i, t)] = share_in.get((i, t), 0) + v
        rep.shared[(k, t)] = rep.shared.get((k, t), 0) + v

    for i in nodes:
        S = prof.initial_stock[i]
        R = D = 0
        for t in periods:
            S += share_in.get((i, t), 0)
            R += arrive.get((i, t), 0) + inst.receipts.get((i, t), 0)
            D_prev = D
            D += out_x.get((i, t), 0)
            rep.S[(i, t)], rep.R[(i, t)], rep.D[(i, t)] = S, R, D
            for w in names:
                d = inst.d(i, t, w)
                v = S + R - D_prev - d
                h = max(0, v)
                ncd = d + D - S - R
                rep.available[(i, t, w)] = v
                rep.H[(i, t, w)] = h
                rep.NCD[(i, t, w)] = ncd
                rep.NCDp[(i, t, w)] = max(0, ncd)
                rep.on_hand[(i, t, w)] = max(0, -ncd)

    for t in periods:
        rep.redistributed[t] = plan.shipped(t)
        for w in names:
            rep.ncd_total[(t, w)] = sum(rep.NCDp[(i, t, w)] for i in nodes)
            rep.stock_total[(t, w)] = sum(rep.H[(i, t, w)] for i in nodes)
            rep.on_hand_total[(t, w)] = sum(rep.on_hand[(i, t, w)] for i in nodes)

    rep.violations = _violations(inst, plan, rep, out_x, options)
    _criteria(inst, rep, baselines or {})
    return rep


def _violations(inst, plan, rep, out_x, options) -> list[Violation]:
    prof = inst.profile
    found: list[Violation] = []
    nodes, periods, names = rep.nodes, range(1, rep.horizon + 1), rep.scenarios
    for i in nodes:
        gamma, cap, g, Q = prof.share_fraction[i], prof.storage_cap[i], prof.max_shipment[i], prof.max_deliveries[i]
        for t in periods:
            sent = out_x.get((i, t), 0)
            for w in names:
                h = rep.H[(i, t, w)]
                slack = gamma * h - sent
                if slack < 0:
                    found.append(Violation("C1", i, t, w, Fraction(slack)))
                if cap is not None and h > cap:
                    found.append(Violation("C6", i, t, w, Fraction(cap - h)))
            loads = sum(1 for j in inst.reach.out_pairs(i) if plan.x.get((i, j, t), 0) >= 1)
            if Q is not None and loads > Q:
                found.append(Violation("C3", i, t, None, Fraction(Q - loads)))
    for (i, j, t), v in sorted(plan.x.items()):
        g = prof.max_shipment[i]
        if v > g:
            found.append(Violation("C2", i, t, None, Fraction(g - v)))
        if options.no_redistribution:
            found.append(Violation("no-redistribution", i, t, None, Fraction(-v)))
    for k, region in enumerate(inst.network.regions, start=1):
        for t in periods:
            q = inst.extra.get(k, t)
            got = rep.shared.get((k, t), 0)
            if got > q or (options.c4_mode != AT_MOST and got != q):
                found.append(Violation("C4", k, t, None, Fraction(q - got) if got > q else Fraction(got - q)))
    senders = {}
    for (i, j, t), v in plan.x.items():
        senders.setdefault((j, t), []).append(i)
    for (j, t), srcs in sorted(senders.items()):
        if j in options.c5_exempt:
            continue
        if any(plan.x.get((j, k, t), 0) >= 1 for k in inst.reach.out_pairs(j)):
            found.append(Violation("C5", j, t, None, Fraction(-1)))
    return found


def _criteria(inst: Instance, rep: EvaluationReport, baselines) -> None:
    nodes, periods = rep.nodes, list(range(1, rep.horizon + 1))
    probs = dict(inst.scenarios.probabilities)
    partition = inst.network.partition
    for fam in FAMILIES:
        if fam == PHI3 and not partition:
            rep.objectives[fam] = None
            rep.scenario_values[fam] = {}
            continue
        rep.objectives[fam] = family_value(fam, rep.NCDp, nodes, periods, probs, partition)
        rep.scenario_values[fam] = {
            w: family_value(fam, rep.NCDp, nodes, periods, {w: Fraction(1)}, partition) for w in rep.scenarios
        }
    for obj in ALL_OBJECTIVES:
        if not obj.regret:
            continue
        base = baselines.get(obj.family)
        per = rep.scenario_values.get(obj.family)
        if base is None or not per:
            rep.objectives[obj.label] = None
        else:
            rep.objectives[obj.label] = max(per[w] - base[w] for w in rep.scenarios)


def feasibility_report(rep: EvaluationReport) -> str:
    return rep.to_json()


# --- baseline without redistribution -----------------------------------------

def solve_baseline_no_redistribution(inst: Instance, obj: Objective, options: ModelOptions | None = None, **solve_kw):
    """Optimal plan with every delivery fixed to zero; sharing stays optimised.

    Returns (plan, report, result). For regret criteria the single-scenario
    baselines come from the model with redistribution allowed, so the two
    regret values are measured against the same reference.
    """
    from dataclasses import replace

    from .formulation import solve_instance

    options = replace(options or ModelOptions(), no_redistribution=True)
    result = solve_instance(inst, obj, options=options, **solve_kw)
    if result.plan is None:
        return None, None, result
    report = evaluate_plan(inst, result.plan, options, result.baselines_by_family())
    return result.plan, report, result


# --- figure tables -------------------------------------------------------------

SERIES_DOC = (
    "ncd_*: sum over units of positive non-covered demand; "
    "stock_*: sum over units of the effective excess H; "
    "on_hand_*: sum over units of stock left after demand and deliveries"
)


def _csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    for r in rows:
        wr.writerow(r)
    return buf.getvalue()


def _cell(v):
    return decimal_str(v) if isinstance(v, Fraction) else v


def emit_figure_tables(inst: Instance, with_report: EvaluationReport, without_report: EvaluationReport | None = None, plan: Plan | None = None) -> dict[str, str]:
    """CSV texts keyed by file name: series.csv, redistributed.csv, shares.csv."""
    if without_report is not None and (
        without_report.horizon != with_report.horizon or without_report.scenarios != with_report.scenarios
    ):
        raise ValueError("reports cover different horizons or scenario sets")
    if with_report.horizon != inst.horizon:
        raise ValueError("report horizon does not match the instance")
    periods = range(1, inst.horizon + 1)
    head = ["period", "scenario", "ncd_with", "stock_with", "on_hand_with"]
    if without_report is not None:
        head += ["ncd_without", "stock_without", "on_hand_without"]
    series = [head]
    for w in with_report.scenarios:
        for t in periods:
            row = [t, w, with_report.ncd_total[(t, w)], with_report.stock_total[(t, w)], with_report.on_hand_total[(t, w)]]
            if without_report is not None:
                row += [without_report.ncd_total[(t, w)], without_report.stock_total[(t, w)], without_report.on_hand_total[(t, w)]]
            series.append([_cell(c) for c in row])

    names = with_report.scenarios
    redis = [["period", "redistributed"] + [f"demand_{w}" for w in names]]
    for t in periods:
        redis.append([t, with_report.redistributed[t]] + [sum(inst.d(i, t, w) for i in inst.node_ids) for w in names])

    shares = [["region", "node_id", "label", "province", "amount", "proportion"]]
    per_node: dict[tuple[int, int], int] = {}
    if plan is not None:
        for (i, k, _t), v in plan.s.items():
            per_node[(k, i)] = per_node.get((k, i), 0) + v
    for k, region in enumerate(inst.network.regions, start=1):
        total = sum(per_node.get((k, i), 0) for i in region)
        for i in sorted(region):
            amount = per_node.get((k, i), 0)
            nd = inst.network.node(i)
            prop = Fraction(amount, total) if total else Fraction(0)
            shares.append([k, i, nd.label, nd.province, amount, decimal_str(prop)])
    return {"series.csv": _csv(series), "redistributed.csv": _csv(redis), "shares.csv": _csv(shares)}


def write_figure_tables(outdir, tables: Mapping[str, str]) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out / name).write_text(text)
