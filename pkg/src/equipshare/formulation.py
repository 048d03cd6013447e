"""Compiles an Instance into a MILP for any of the eight criteria.

Modelling choices made explicit here:

* Availability ``avail_i_t = S + R - D(t-1)`` is one scenario-free column per
  (i, t), defined by a one-step recursion, so every row stays short.
* The excess H = max(0, avail - d) is exact: with indicator b,
  H >= avail - d, H <= avail - d + M1 (1 - b), H <= M2 b, H >= 0,
  where M1 = d (avail is never negative) and M2 is the largest excess the
  storage cap and the availability bound permit.
* NCD+ >= d - avail + (deliveries this period), NCD+ >= 0, and NCD+ <= d,
  which holds because a unit never ships more than it holds.
* Deliveries dispatched in the last period with a positive lead time can never
  arrive and only add to non-covered demand, so they are fixed to zero.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from .evaluation import evaluate_plan
from .instance import Instance
from .milpcore import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    INTEGER,
    LE,
    OPTIMAL,
    MILPModel,
    Solution,
    SolveLimits,
    ToleranceConfig,
)
from .milpcore import bnb
from .milpcore.external import solve_with_fallback
from .milpcore.lpformat import save_lp
from .objectives import AT_MOST, FAMILIES, PHI1, PHI2, PHI3, PHI4, ModelOptions, Objective
from .plan import Plan
from .rounding import rounded_plans

log = logging.getLogger(__name__)

# Largest big-M accepted in floating-point mode: an indicator within the
# integrality tolerance (1e-6) must not open up half a unit of excess.
FLOAT_BIG_M_LIMIT = 5 * 10**5


class CompileError(ValueError):
    pass


class BaselineError(RuntimeError):
    pass


@dataclass
class VariableIndex:
    x: dict = field(default_factory=dict)  # (i, j, t) -> column
    y: dict = field(default_factory=dict)
    s: dict = field(default_factory=dict)  # (i, k, t)
    avail: dict = field(default_factory=dict)  # (i, t)
    H: dict = field(default_factory=dict)  # (i, t, w)
    b: dict = field(default_factory=dict)
    ncdp: dict = field(default_factory=dict)
    eta: int | None = None
    alpha: int | None = None

    def sidecar(self, model: MILPModel, scenarios) -> dict:
        names = model.var_names
        widx = {w: n for n, w in enumerate(scenarios, start=1)}

        def table(d, fields):
            return [dict(zip(("column",) + fields, (names[c],) + tuple(k))) for k, c in d.items()]

        doc = {
            "scenarios": {str(widx[w]): w for w in scenarios},
            "x": table(self.x, ("i", "j", "t")),
            "y": table(self.y, ("i", "j", "t")),
            "s": table(self.s, ("i", "k", "t")),
            "avail": table(self.avail, ("i", "t")),
            "H": table(self.H, ("i", "t", "scenario")),
            "b": table(self.b, ("i", "t", "scenario")),
            "ncdp": table(self.ncdp, ("i", "t", "scenario")),
            "eta": None if self.eta is None else names[self.eta],
            "alpha": None if self.alpha is None else names[self.alpha],
        }
        return doc

    def decode(self, model: MILPModel, values: Mapping[str, object]) -> Plan:
        names = model.var_names

        def whole(v):
            r = math.floor(Fraction(v) + Fraction(1, 2))
            if abs(Fraction(v) - r) > Fraction(1, 10**5):
                raise ValueError(f"non-integral decision value {v}")
            return int(r)

        x = {k: whole(values[names[c]]) for k, c in self.x.items()}
        s = {k: whole(values[names[c]]) for k, c in self.s.items()}
        return Plan(x, s)


@dataclass
class CompiledModel:
    model: MILPModel
    index: VariableIndex
    instance: Instance
    objective: Objective
    options: ModelOptions
    baselines: dict | None = None  # scenario -> value, regret only
    baseline_stats: dict | None = None
    big_m: object = 0

    def sidecar_json(self) -> str:
        doc = self.index.sidecar(self.model, self.instance.scenarios.names)
        doc["objective"] = self.objective.label
        if self.baselines is not None:
            doc["baselines"] = {w: str(v) for w, v in self.baselines.items()}
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def _frac(v):
    return v if isinstance(v, (int, Fraction)) else Fraction(v)


def compile_model(
    inst: Instance,
    obj: Objective,
    options: ModelOptions | None = None,
    baselines: Mapping[str, object] | None = None,
    mode: str = "rational",
) -> CompiledModel:
    """Build the MILP. Regret objectives need ``baselines`` (see compile_regret)."""
    options = options or ModelOptions()
    net = inst.network
    if obj.family == PHI3 and not net.partition:
        raise CompileError("phi3 needs a fairness partition in the network")
    if obj.regret and baselines is None:
        raise CompileError("regret objectives need single-scenario baselines")
    prof = inst.profile
    nodes = inst.node_ids
    q = inst.horizon
    periods = list(inst.periods)
    names = inst.scenarios.names
    widx = {w: n for n, w in enumerate(names, start=1)}
    probs = inst.scenarios.probabilities
    W = sorted(inst.reach.pairs)
    lag = {(i, j): inst.reach.lag(i, j) for (i, j) in W}
    positive_lead = {(i, j): inst.reach.lengths[(i, j)] > 0 for (i, j) in W}
    out_of = {i: [j for (a, j) in W if a == i] for i in nodes}
    into = {i: [a for (a, j) in W if j == i] for i in nodes}
    regions = net.regions
    for i in nodes:
        if not 0 <= prof.share_fraction[i] <= 1:
            raise CompileError(f"share fraction of node {i} outside [0,1]")

    m = MILPModel(f"equipshare-{obj.label}")
    idx = VariableIndex()

    # decisions
    for t in periods:
        for (i, j) in W:
            ub = prof.max_shipment[i]
            if options.no_redistribution or (t == q and positive_lead[(i, j)]):
                ub = 0
            elif options.arrive_in_horizon and t + lag[(i, j)] > q:
                ub = 0
            idx.x[(i, j, t)] = m.add_var(f"x_{i}_{j}_{t}", 0, ub, INTEGER)
    for t in periods:
        for (i, j) in W:
            ub = 1 if m.ub[idx.x[(i, j, t)]] > 0 else 0
            idx.y[(i, j, t)] = m.add_var(f"y_{i}_{j}_{t}", 0, ub, BINARY)
    for t in periods:
        for k, region in enumerate(regions, start=1):
            amount = inst.extra.get(k, t)
            if amount <= 0:
                continue
            for i in sorted(region):
                idx.s[(i, k, t)] = m.add_var(f"s_{i}_{k}_{t}", 0, amount, INTEGER)

    # availability bounds: all stock in the system, and the storage-implied cap
    system = sum(prof.initial_stock[i] for i in nodes)
    sys_by_t = {}
    for t in periods:
        system += sum(inst.extra.get(k, t) for k in range(1, len(regions) + 1))
        system += sum(inst.receipts.get((i, t), 0) for i in nodes)
        sys_by_t[t] = system
    avail_ub = {}
    for t in periods:
        for i in nodes:
            ub = sys_by_t[t]
            cap = prof.storage_cap[i]
            if cap is not None:
                ub = min(ub, cap + min(inst.d(i, t, w) for w in names))
            avail_ub[(i, t)] = max(ub, 0)
            idx.avail[(i, t)] = m.add_var(f"avail_{i}_{t}", 0, avail_ub[(i, t)], CONTINUOUS)

    big_m = 0
    for t in periods:
        for i in nodes:
            cap = prof.storage_cap[i]
            for w in names:
                d = inst.d(i, t, w)
                m2 = avail_ub[(i, t)] - d
                if cap is not None:
                    m2 = min(m2, cap)
                m2 = max(m2, 0)
                big_m = max(big_m, m2, d)
                tag = f"{i}_{t}_{widx[w]}"
                idx.H[(i, t, w)] = m.add_var(f"H_{tag}", 0, m2, CONTINUOUS)
                lo_b = 1 if (d == 0 and m2 > 0) else 0
                hi_b = 0 if m2 == 0 else 1
                idx.b[(i, t, w)] = m.add_var(f"b_{tag}", lo_b, hi_b, BINARY)
    if mode == "float" and big_m >= FLOAT_BIG_M_LIMIT:
        raise CompileError(
            f"big-M {big_m} is too large for floating-point tolerances; use rational mode"
        )
    for t in periods:
        for i in nodes:
            for w in names:
                tag = f"{i}_{t}_{widx[w]}"
                idx.ncdp[(i, t, w)] = m.add_var(f"ncdp_{tag}", 0, inst.d(i, t, w), CONTINUOUS)

    # availability recursion
    for i in nodes:
        for t in periods:
            terms = [(idx.avail[(i, t)], 1)]
            rhs = inst.receipts.get((i, t), 0)
            if t == 1:
                rhs += prof.initial_stock[i]
            else:
                terms.append((idx.avail[(i, t - 1)], -1))
                terms += [(idx.x[(i, j, t - 1)], 1) for j in out_of[i]]
            terms += [(idx.s[(i, k, t)], -1) for k in range(1, len(regions) + 1) if (i, k, t) in idx.s]
            for j in into[i]:
                t0 = t - lag[(j, i)]
                if t0 >= 1:
                    terms.append((idx.x[(j, i, t0)], -1))
            m.add_constraint(terms, EQ, rhs, name=f"AVAIL_{i}_{t}", tag="AVAIL")

    # exact excess
    for t in periods:
        for i in nodes:
            a = idx.avail[(i, t)]
            for w in names:
                tag = f"{i}_{t}_{widx[w]}"
                d = inst.d(i, t, w)
                h, b = idx.H[(i, t, w)], idx.b[(i, t, w)]
                m2 = m.ub[h]
                m.add_constraint([(h, 1), (a, -1)], GE, -d, name=f"HLO_{tag}", tag="HLIN")
                m.add_constraint([(h, 1), (a, -1), (b, d)], LE, 0, name=f"HUP_{tag}", tag="HLIN")
                m.add_constraint([(h, 1), (b, -m2)], LE, 0, name=f"HON_{tag}", tag="HLIN")

    # (C1) deliveries within a share of the excess, every scenario
    for t in periods:
        for i in nodes:
            if not out_of[i]:
                continue
            gamma = _frac(prof.share_fraction[i])
            sent = [(idx.x[(i, j, t)], 1) for j in out_of[i]]
            for w in names:
                m.add_constraint(sent + [(idx.H[(i, t, w)], -gamma)], LE, 0, name=f"C1_{i}_{t}_{widx[w]}", tag="C1")
    # (C2) link deliveries and load indicators
    for t in periods:
        for (i, j) in W:
            x, y = idx.x[(i, j, t)], idx.y[(i, j, t)]
            m.add_constraint([(y, 1), (x, -1)], LE, 0, name=f"C2L_{i}_{j}_{t}", tag="C2")
            m.add_constraint([(x, 1), (y, -prof.max_shipment[i])], LE, 0, name=f"C2U_{i}_{j}_{t}", tag="C2")
    # (C3) number of loads per unit and period
    for t in periods:
        for i in nodes:
            Q = prof.max_deliveries[i]
            if Q is None or not out_of[i]:
                continue
            m.add_constraint([(idx.y[(i, j, t)], 1) for j in out_of[i]], LE, Q, name=f"C3_{i}_{t}", tag="C3")
    # (C4) sharing of extra stock
    for t in periods:
        for k, region in enumerate(regions, start=1):
            amount = inst.extra.get(k, t)
            if amount <= 0:
                continue
            sense = LE if options.c4_mode == AT_MOST else EQ
            m.add_constraint([(idx.s[(i, k, t)], 1) for i in sorted(region)], sense, amount, name=f"C4_{k}_{t}", tag="C4")
    # (C5) no unit both receives and delivers in one period
    exempt = options.c5_exempt
    for t in periods:
        for j in nodes:
            if j in exempt:
                continue
            for i in into[j]:
                for k in out_of[j]:
                    if k == i and not (i in exempt or j < i):
                        continue
                    m.add_constraint(
                        [(idx.y[(i, j, t)], 1), (idx.y[(j, k, t)], 1)], LE, 1, name=f"C5_{i}_{j}_{k}_{t}", tag="C5"
                    )
    # (C6) storage
    for t in periods:
        for i in nodes:
            cap = prof.storage_cap[i]
            if cap is None:
                continue
            for w in names:
                m.add_constraint([(idx.H[(i, t, w)], 1)], LE, cap, name=f"C6_{i}_{t}_{widx[w]}", tag="C6")
    # positive non-covered demand
    for t in periods:
        for i in nodes:
            sent = [(idx.x[(i, j, t)], -1) for j in out_of[i]]
            for w in names:
                m.add_constraint(
                    [(idx.ncdp[(i, t, w)], 1), (idx.avail[(i, t)], 1)] + sent,
                    GE,
                    inst.d(i, t, w),
                    name=f"NCD_{i}_{t}_{widx[w]}",
                    tag="NCD",
                )

    _objective(m, idx, inst, obj, baselines, nodes, periods, names, widx, probs)
    m.metadata.update({"objective": obj.label, "scenarios": list(names), "big_m": big_m})
    cm = CompiledModel(m, idx, inst, obj, options, dict(baselines) if baselines is not None else None, big_m=big_m)
    return cm


def _objective(m, idx, inst, obj, baselines, nodes, periods, names, widx, probs):
    partition = inst.network.partition
    total = {w: sum(inst.d(i, t, w) for i in nodes for t in periods) for w in names}

    def groups():
        """(label, [(i, t), ...]) for each term inside the max of the family."""
        if obj.family == PHI1:
            return [(f"{i}", [(i, t) for t in periods]) for i in nodes]
        if obj.family == PHI2:
            return [(f"{i}_{t}", [(i, t)]) for i in nodes for t in periods]
        if obj.family == PHI3:
            return [(f"g{n}", [(i, t) for i in sorted(g) for t in periods]) for n, g in enumerate(partition, start=1)]
        return [("all", [(i, t) for i in nodes for t in periods])]

    if obj.regret:
        base = {w: _frac(baselines[w]) for w in names}
        lo = -min(base.values())
        hi = max(total.values())
        alpha = m.add_var("alpha", lo, max(hi, lo), CONTINUOUS)
        idx.alpha = alpha
        for w in names:
            for label, cells in groups():
                terms = [(alpha, 1)] + [(idx.ncdp[(i, t, w)], -1) for (i, t) in cells]
                m.add_constraint(terms, GE, -base[w], name=f"REGRET_{label}_{widx[w]}", tag="REGRET")
        m.set_objective([(alpha, 1)])
        # single-scenario values are whole numbers; so are computed baselines
        if all(v.denominator == 1 for v in base.values()):
            m.objective_step = Fraction(1)
        return
    # integral plans give integral NCD+, so values are multiples of 1/lcm(denominators)
    m.objective_step = Fraction(1, math.lcm(*(_frac(probs[w]).denominator for w in names)))
    if obj.family == PHI4:
        terms = [(idx.ncdp[(i, t, w)], _frac(probs[w])) for w in names for i in nodes for t in periods]
        m.set_objective(terms)
        return
    expected_total = sum(_frac(probs[w]) * total[w] for w in names)
    eta = m.add_var("eta", 0, expected_total, CONTINUOUS)
    idx.eta = eta
    for label, cells in groups():
        terms = [(eta, 1)] + [(idx.ncdp[(i, t, w)], -_frac(probs[w])) for w in names for (i, t) in cells]
        m.add_constraint(terms, GE, 0, name=f"OBJ_{label}", tag="OBJ")
    m.set_objective([(eta, 1)])


def model_statistics(cm: CompiledModel) -> dict:
    st = cm.model.statistics()
    rows = {tag: st["by_tag"].get(tag, 0) for tag in ("C1", "C2", "C3", "C4", "C5", "C6", "AVAIL", "HLIN", "NCD", "OBJ", "REGRET")}
    return {
        "variables": st["variables"],
        "constraints": st["constraints"],
        "nonzeros": st["nonzeros"],
        "by_kind": st["by_kind"],
        "rows_by_tag": rows,
        "columns": {
            "x": len(cm.index.x),
            "y": len(cm.index.y),
            "s": len(cm.index.s),
            "avail": len(cm.index.avail),
            "H": len(cm.index.H),
            "b": len(cm.index.b),
            "ncdp": len(cm.index.ncdp),
            "eta": int(cm.index.eta is not None),
            "alpha": int(cm.index.alpha is not None),
        },
    }


def export_lp(cm: CompiledModel, lp_path, sidecar_path) -> dict:
    """Write the LP file and its index sidecar; returns the model statistics.

    The LP header lists the row count of every constraint tag, zero counts
    included, so the file documents which constraint families were generated.
    """
    stats = model_statistics(cm)
    comments = [f"objective {cm.objective.label}"]
    comments += [f"rows {tag}: {n}" for tag, n in stats["rows_by_tag"].items()]
    save_lp(cm.model, lp_path, comments)
    with open(sidecar_path, "w", newline="\n") as fh:
        fh.write(cm.sidecar_json())
    return stats


# --- full column assignment for a known plan ------------------------------------

def assignment_from_plan(cm: CompiledModel, plan: Plan) -> dict | None:
    """Column values realising ``plan`` in the compiled model, or None if the plan is infeasible."""
    inst, idx, m = cm.instance, cm.index, cm.model
    if any(k not in idx.x for k in plan.x) or any(k not in idx.s for k in plan.s):
        return None
    if any(v > m.ub[idx.x[k]] for k, v in plan.x.items()):
        return None
    rep = evaluate_plan(inst, plan, cm.options)
    if not rep.feasible:
        return None
    names = m.var_names
    val: dict[str, object] = {}
    for k, c in idx.x.items():
        val[names[c]] = plan.x.get(k, 0)
    for (i, j, t), c in idx.y.items():
        val[names[c]] = plan.y(i, j, t)
    for k, c in idx.s.items():
        val[names[c]] = plan.s.get(k, 0)
    for (i, t), c in idx.avail.items():
        val[names[c]] = rep.S[(i, t)] + rep.R[(i, t)] - (rep.D[(i, t - 1)] if t > 1 else 0)
    for key, c in idx.H.items():
        val[names[c]] = rep.H[key]
        d = inst.d(*key)
        val[names[idx.b[key]]] = 1 if (rep.available[key] > 0 or (d == 0 and m.lb[idx.b[key]] == 1)) else 0
        if m.ub[idx.b[key]] == 0:
            val[names[idx.b[key]]] = 0
    for key, c in idx.ncdp.items():
        val[names[c]] = rep.NCDp[key]
    if idx.eta is not None:
        val[names[idx.eta]] = rep.objectives[cm.objective.family]
    if idx.alpha is not None:
        per = rep.scenario_values[cm.objective.family]
        val[names[idx.alpha]] = max(per[w] - _frac(cm.baselines[w]) for w in inst.scenarios.names)
    return val


def idle_plan(inst: Instance, options: ModelOptions | None = None) -> Plan:
    """No deliveries; extra stock goes one unit at a time to the member with most storage headroom."""
    prof = inst.profile
    names = inst.scenarios.names
    held = {i: prof.initial_stock[i] for i in inst.node_ids}
    s: dict[tuple[int, int, int], int] = {}
    for t in inst.periods:
        for i in inst.node_ids:
            held[i] += inst.receipts.get((i, t), 0)
        for k, region in enumerate(inst.network.regions, start=1):
            for _ in range(inst.extra.get(k, t)):

                def headroom(i):
                    cap = prof.storage_cap[i]
                    if cap is None:
                        return math.inf
                    return cap + min(inst.d(i, t, w) for w in names) - held[i]

                best = max(sorted(region), key=lambda i: (headroom(i), -i))
                held[best] += 1
                s[(best, k, t)] = s.get((best, k, t), 0) + 1
    return Plan({}, s)


# --- solving ------------------------------------------------------------------

@dataclass
class SolveResult:
    status: str
    objective: object
    plan: Plan | None
    solution: Solution
    compiled: CompiledModel
    baselines: dict | None = None  # scenario -> value for the compiled family

    @property
    def proven_optimal(self) -> bool:
        return self.status == OPTIMAL

    def baselines_by_family(self) -> dict:
        if self.baselines is None:
            return {}
        return {self.compiled.objective.family: self.baselines}


def _default_solver(limits: SolveLimits, tol: ToleranceConfig) -> Callable:
    def run(model: MILPModel, hint=None, heuristic=None) -> Solution:
        return bnb.solve(model, limits, tol, incumbent=hint, heuristic=heuristic)

    return run


def make_solver(limits: SolveLimits | None = None, tol: ToleranceConfig | None = None, external=None, verify: bool = False) -> Callable:
    """Solver callable ``run(model, hint) -> Solution``.

    ``external`` is an ExternalSolver; when it is missing the built-in solver
    runs instead. ``verify`` also runs the built-in solver and records any
    disagreement in the solution notes.
    """
    limits = limits or SolveLimits()
    tol = tol or ToleranceConfig()
    if external is None:
        return _default_solver(limits, tol)

    def run(model: MILPModel, hint=None, heuristic=None) -> Solution:
        sol, notices = solve_with_fallback(model, external, limits, tol, verify=verify)
        for note in notices:
            log.warning(note)
        sol.notes.extend(notices)
        return sol

    return run


def compile_regret(
    inst: Instance,
    family: str,
    options: ModelOptions | None = None,
    solver: Callable | None = None,
    mode: str = "rational",
) -> CompiledModel:
    """Solve each single-scenario problem to optimality, then build the minmax-regret model.

    Baselines always come from the model with redistribution allowed, also when
    ``options`` fixes deliveries to zero, so regret values stay comparable.
    """
    options = options or ModelOptions()
    solver = solver or _default_solver(SolveLimits(), ToleranceConfig(mode))
    base_options = ModelOptions(options.c4_mode, options.c5_exempt, False)
    baselines, stats = {}, {}
    for w in inst.scenarios.names:
        sub = inst.with_scenarios([w])
        res = solve_compiled(compile_model(sub, Objective(family), base_options, mode=mode), solver)
        if res.status != OPTIMAL:
            raise BaselineError(f"single-scenario problem for {w!r} ended with status {res.status}")
        # exact value of the optimal plan (float-mode objectives carry round-off)
        baselines[w] = evaluate_plan(sub, res.plan, base_options).objectives[family]
        stats[w] = {"nodes": res.solution.nodes, "iterations": res.solution.iterations, "seconds": res.solution.wall_time}
    cm = compile_model(inst, Objective(family, True), options, baselines, mode=mode)
    cm.baseline_stats = stats
    return cm


def solve_compiled(cm: CompiledModel, solver: Callable) -> SolveResult:
    hint = assignment_from_plan(cm, idle_plan(cm.instance, cm.options))

    def from_lp(values):
        found = (assignment_from_plan(cm, plan) for plan in rounded_plans(cm, values))
        return [a for a in found if a is not None]

    sol = solver(cm.model, hint, from_lp)
    plan = None
    if sol.has_incumbent and sol.values:
        plan = cm.index.decode(cm.model, sol.values)
    return SolveResult(sol.status, sol.objective, plan, sol, cm, cm.baselines)


def solve_instance(
    inst: Instance,
    obj: Objective,
    options: ModelOptions | None = None,
    limits: SolveLimits | None = None,
    tol: ToleranceConfig | None = None,
    external=None,
    verify: bool = False,
) -> SolveResult:
    tol = tol or ToleranceConfig()
    solver = make_solver(limits, tol, external, verify)
    if obj.regret:
        cm = compile_regret(inst, obj.family, options, solver, mode=tol.mode)
    else:
        cm = compile_model(inst, obj, options, mode=tol.mode)
    return solve_compiled(cm, solver)
