"""Turning fractional LP decisions into feasible plans (a primal heuristic for the solver)."""

from __future__ import annotations

import math
from typing import Sequence

from .evaluation import evaluate_plan
from .objectives import AT_MOST
from .plan import Plan

REPAIR_STEPS = 400


def _round_shares(cm, values: Sequence[float]) -> dict:
    """Largest-remainder rounding of each region's shares; plain floors in at-most mode."""
    inst, idx = cm.instance, cm.index
    groups: dict = {}
    for (i, k, t), c in idx.s.items():
        groups.setdefault((k, t), []).append((i, max(0.0, float(values[c]))))
    out = {}
    for (k, t), cells in groups.items():
        q = inst.extra.get(k, t)
        floors = {i: min(q, math.floor(v + 1e-6)) for i, v in cells}
        left = q - sum(floors.values()) if cm.options.c4_mode != AT_MOST else 0
        if left < 0:
            # too many after flooring noise; trim from the largest
            for i, _v in sorted(cells, key=lambda iv: -floors[iv[0]]):
                cut = min(floors[i], -left)
                floors[i] -= cut
                left += cut
        order = sorted(cells, key=lambda iv: (-(iv[1] - math.floor(iv[1] + 1e-6)), iv[0]))
        for i, _v in order:
            if left <= 0:
                break
            floors[i] += 1
            left -= 1
        if left > 0:
            floors[order[0][0]] += left
        for i, v in floors.items():
            if v:
                out[(i, k, t)] = v
    return out


def _round_deliveries(cm, values: Sequence[float], mode: str) -> dict:
    out = {}
    for key, c in cm.index.x.items():
        v = max(0.0, float(values[c]))
        r = math.floor(v + 1e-6) if mode == "floor" else math.floor(v + 0.5)
        r = min(r, int(cm.model.ub[c])) if math.isfinite(cm.model.ub[c]) else r
        if r > 0:
            out[key] = r
    return out


def _repair(cm, x: dict, s: dict) -> Plan | None:
    inst, options = cm.instance, cm.options
    prof = inst.profile
    x = dict(x)
    for _step in range(REPAIR_STEPS):
        plan = Plan(x, s)
        rep = evaluate_plan(inst, plan, options)
        if not rep.violations:
            return plan
        v = min(rep.violations, key=lambda v: (v.t, v.constraint))
        if v.constraint == "C2":
            for key in [k for k in x if k[0] == v.i and k[2] == v.t]:
                x[key] = min(x[key], prof.max_shipment[v.i])
        elif v.constraint == "C1":
            out = [(x[k], -k[1], k) for k in x if k[0] == v.i and k[2] == v.t]
            if not out:
                return None
            _amt, _j, key = max(out)
            x[key] -= 1
        elif v.constraint == "C3":
            out = [(x[k], k[1], k) for k in x if k[0] == v.i and k[2] == v.t]
            _amt, _j, key = min(out)
            del x[key]
        elif v.constraint == "C5":
            incoming = [k for k in x if k[1] == v.i and k[2] == v.t]
            outgoing = [k for k in x if k[0] == v.i and k[2] == v.t]
            drop = incoming if sum(x[k] for k in incoming) <= sum(x[k] for k in outgoing) else outgoing
            for key in drop:
                del x[key]
        elif v.constraint == "C6":
            # too much stock held: take back the latest shipment already arrived
            arrived = [
                (t, j, (j, i, t))
                for (j, i, t) in x
                if i == v.i and t + inst.reach.lag(j, i) <= v.t
            ]
            if not arrived:
                return None
            _t, _j, key = max(arrived)
            x[key] -= 1
        else:
            return None
        x = {k: a for k, a in x.items() if a > 0}
    return None


def rounded_plans(cm, values: Sequence[float]) -> list[Plan]:
    """Feasible plans obtained by rounding and repairing an LP point (possibly none)."""
    s = _round_shares(cm, values)
    found = []
    for mode in ("nearest", "floor"):
        plan = _repair(cm, _round_deliveries(cm, values, mode), s)
        if plan is not None and plan not in found:
            found.append(plan)
    return found
