"""Brute-force reference: enumerate every feasible plan of a tiny instance.

Written from the model definitions only. It reads instance data but shares no
code with the compiler or the evaluator: arrivals use the raw path length
(dispatch t' reaches j by t when t' + length <= t), excess and non-covered
demand are recomputed by the literal recursions, and every criterion is
aggregated here.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

FAMILIES = ("phi1", "phi2", "phi3", "phi4")


class TooLarge(Exception):
    pass


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _share_choices(inst, t, at_most):
    """All ways to hand out every region's extra stock in period t."""
    per_region = []
    for k, region in enumerate(inst.network.regions, start=1):
        q = inst.extra.amounts.get((k, t), 0)
        members = sorted(region)
        totals = range(q + 1) if at_most else (q,)
        opts = [dict(zip(((i, k) for i in members), comp)) for tot in totals for comp in _compositions(tot, len(members))]
        per_region.append(opts)
    for combo in itertools.product(*per_region):
        merged = {}
        for part in combo:
            merged.update(part)
        yield merged


def _delivery_choices(inst, t, H, names, no_redistribution, exempt):
    """Dispatch vectors for period t that satisfy C1, C2, C3 and C5."""
    nodes = inst.node_ids
    prof = inst.profile
    if no_redistribution:
        yield {}
        return
    per_node = []
    for i in nodes:
        dests = sorted(j for j in nodes if (i, j) in inst.reach.pairs)
        cap = min(prof.share_fraction[i] * H[(i, w)] for w in names)
        opts = []
        for amounts in itertools.product(range(prof.max_shipment[i] + 1), repeat=len(dests)):
            if sum(amounts) > cap:
                continue
            used = sum(1 for a in amounts if a > 0)
            Q = prof.max_deliveries[i]
            if Q is not None and used > Q:
                continue
            opts.append({(i, j): a for j, a in zip(dests, amounts) if a > 0})
        per_node.append(opts)
    for combo in itertools.product(*per_node):
        x = {}
        for part in combo:
            x.update(part)
        receivers = {j for (_i, j) in x}
        senders = {i for (i, _j) in x}
        if any(j in senders for j in receivers if j not in exempt):
            continue
        yield x


def enumerate_outcomes(inst, names, c4_mode="equality", c5_exempt=frozenset(), no_redistribution=False, limit=200_000):
    """Yield (plan_x, plan_s, ncdp) for every feasible plan under scenarios ``names``.

    ncdp maps (i, t, w) to max(0, NCD). Raises TooLarge after ``limit`` plans.
    """
    nodes = inst.node_ids
    q = inst.horizon
    prof = inst.profile
    at_most = c4_mode == "at-most"
    length = inst.reach.lengths
    count = [0]

    def arrivals(x_hist, j, t):
        return sum(v for (i, jj, tt), v in x_hist.items() if jj == j and tt + length[(i, jj)] <= t)

    def rec(t, x_hist, s_hist, ncdp):
        if t > q:
            count[0] += 1
            if count[0] > limit:
                raise TooLarge()
            yield dict(x_hist), dict(s_hist), dict(ncdp)
            return
        for shares in _share_choices(inst, t, at_most):
            s_now = dict(s_hist)
            for (i, k), v in shares.items():
                if v:
                    s_now[(i, k, t)] = v
            S = {i: prof.initial_stock[i] + sum(v for (ii, _k, tt), v in s_now.items() if ii == i and tt <= t) for i in nodes}
            R = {i: arrivals(x_hist, i, t) + sum(v for (ii, tt), v in inst.receipts.items() if ii == i and tt <= t) for i in nodes}
            D_prev = {i: sum(v for (ii, _j, tt), v in x_hist.items() if ii == i and tt <= t - 1) for i in nodes}
            H = {}
            ok = True
            for i in nodes:
                for w in names:
                    H[(i, w)] = max(0, S[i] + R[i] - D_prev[i] - inst.scenarios.demand[(i, t, w)])
                    a = prof.storage_cap[i]
                    if a is not None and H[(i, w)] > a:
                        ok = False
            if not ok:
                continue
            for x in _delivery_choices(inst, t, H, names, no_redistribution, c5_exempt):
                x_now = dict(x_hist)
                for (i, j), v in x.items():
                    x_now[(i, j, t)] = v
                nc = dict(ncdp)
                for i in nodes:
                    D = D_prev[i] + sum(v for (ii, _j), v in x.items() if ii == i)
                    for w in names:
                        nc[(i, t, w)] = max(0, inst.scenarios.demand[(i, t, w)] + D - S[i] - R[i])
                yield from rec(t + 1, x_now, s_now, nc)

    yield from rec(1, {}, {}, {})


def criterion(family, ncdp, inst, probs):
    nodes, periods = inst.node_ids, list(inst.periods)
    if family == "phi1":
        return max(sum(p * ncdp[(i, t, w)] for w, p in probs.items() for t in periods) for i in nodes)
    if family == "phi2":
        return max(sum(p * ncdp[(i, t, w)] for w, p in probs.items()) for i in nodes for t in periods)
    if family == "phi3":
        return max(
            sum(p * ncdp[(i, t, w)] for w, p in probs.items() for i in group for t in periods)
            for group in inst.network.partition
        )
    return sum(p * ncdp[(i, t, w)] for w, p in probs.items() for i in nodes for t in periods)


def oracle_optima(inst, c4_mode="equality", c5_exempt=frozenset(), no_redistribution=False, limit=200_000):
    """Optimal value of all eight criteria (None where no plan is feasible).

    Regret baselines are single-scenario optima with redistribution allowed.
    """
    names = inst.scenarios.names
    probs = {w: Fraction(inst.scenarios.probabilities[w]) for w in names}
    families = [f for f in FAMILIES if f != "phi3" or inst.network.partition]
    best = {f: None for f in families}
    best.update({f"{f}-regret": None for f in families})
    baseline = {f: {} for f in families}
    for w in names:
        for _x, _s, nc in enumerate_outcomes(inst, (w,), c4_mode, c5_exempt, False, limit):
            for f in families:
                v = criterion(f, nc, inst, {w: Fraction(1)})
                if baseline[f].get(w) is None or v < baseline[f][w]:
                    baseline[f][w] = v
    for _x, _s, nc in enumerate_outcomes(inst, names, c4_mode, c5_exempt, no_redistribution, limit):
        for f in families:
            v = criterion(f, nc, inst, probs)
            if best[f] is None or v < best[f]:
                best[f] = v
            if all(baseline[f].get(w) is not None for w in names):
                r = max(criterion(f, nc, inst, {w: Fraction(1)}) - baseline[f][w] for w in names)
                if best[f"{f}-regret"] is None or r < best[f"{f}-regret"]:
                    best[f"{f}-regret"] = r
    return best
