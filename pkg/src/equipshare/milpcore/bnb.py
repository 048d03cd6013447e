"""Best-bound branch-and-bound over the dual simplex."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from collections import OrderedDict
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from . import cuts as gomory
from . import simplex
from .model import (
    CONTINUOUS,
    INFEASIBLE,
    NODE_LIMIT,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    MILPModel,
    Solution,
    SolveLimits,
    ToleranceConfig,
)
from .presolve import PresolveInfeasible, tighten_bounds

log = logging.getLogger(__name__)

# Tableaus at or below this size are kept whole for every open parent; larger
# ones stay whole only for the most recent parents and are otherwise rebuilt
# from the basis when a child is popped.
SMALL_TABLEAU_BYTES = 4 << 20
HOT_SNAPSHOTS = 24
# Run the diving heuristic at the root and then every this many nodes.
DIVE_EVERY = 100
DIVE_SOLVES_PER_COLUMN = 1
# Gomory rounds at the root and the cap on cuts per round.
CUT_ROUNDS = 5
CUTS_PER_ROUND = 50


def _exact_value(v):
    fr = Fraction(int(v.numerator), int(v.denominator))
    return fr.numerator if fr.denominator == 1 else fr


class _Snapshot:
    """LP state of a branched node, shared by its two children."""

    __slots__ = ("lp", "basis")

    def __init__(self, lp):
        self.lp = lp
        self.basis = None

    def shrink(self):
        if self.lp is not None:
            lp = self.lp
            self.basis = (lp.lb.copy(), lp.ub.copy(), lp.head.copy(), lp.state.copy(), lp.z.copy(), lp.artificial.copy(), lp.iterations)
            self.lp = None

    def restore(self, data) -> simplex.DualSimplex:
        if self.lp is not None:
            return self.lp.copy()
        lb, ub, head, state, z, art, iters = self.basis
        lp = simplex.DualSimplex.__new__(simplex.DualSimplex)
        template = simplex.DualSimplex(data, lb=lb, ub=ub)
        lp.__dict__.update(template.__dict__)
        lp.head, lp.state, lp.z, lp.artificial = head.copy(), state.copy(), z.copy(), art.copy()
        lp.iterations = iters
        lp.since_refactor = 1
        lp.refactor()
        return lp


def _check_incumbent(model: MILPModel, assignment: dict, tol: ToleranceConfig):
    values = []
    for name in model.var_names:
        if name not in assignment:
            return None
        values.append(assignment[name])
    if tol.exact:
        values = [Fraction(v) if not isinstance(v, int) else v for v in values]
        bad = model.violations(values, 0)
    else:
        bad = model.violations([float(v) for v in values], tol.feasibility)
    if bad:
        log.debug("incumbent hint rejected: %s", bad[:3])
        return None
    return values


def solve(
    model: MILPModel,
    limits: SolveLimits | None = None,
    tol: ToleranceConfig | None = None,
    incumbent: dict | None = None,
    heuristic=None,
) -> Solution:
    """Branch-and-bound.

    ``incumbent`` is an optional starting assignment {name: value}.
    ``heuristic(values)`` may turn an LP point (structural values by column)
    into candidate assignments; it runs alongside the diving heuristic.
    """
    limits = limits or SolveLimits()
    tol = tol or ToleranceConfig()
    model.validate()
    start = time.perf_counter()
    exact = tol.exact
    n = model.num_vars

    def finish(status, values=None, obj=None, bound=None, nodes=0, iters=0, notes=()):
        out = {}
        if values is not None:
            for j, name in enumerate(model.var_names):
                out[name] = values[j]
        return Solution(status, out, obj, bound, nodes, iters, time.perf_counter() - start, list(notes))

    try:
        lo, hi = tighten_bounds(model)
    except PresolveInfeasible as exc:
        return finish(INFEASIBLE, notes=[f"presolve: {exc}"])

    data = simplex.LPData(model, exact)
    conv = simplex._to_exact if exact else float
    dtype = object if exact else float
    lb = data.lb.copy()
    ub = data.ub.copy()
    lb[:n] = np.array([conv(v) for v in lo], dtype=dtype)
    ub[:n] = np.array([conv(v) for v in hi], dtype=dtype)
    integer = np.array([k != CONTINUOUS for k in model.kind], dtype=bool)
    int_cols = np.flatnonzero(integer)
    itol = 0 if exact else tol.integrality

    best_values = None
    best_obj = None
    if incumbent is not None:
        vals = _check_incumbent(model, incumbent, tol)
        if vals is not None:
            best_values = vals
            best_obj = model.objective_value(vals)
            if not exact:
                best_obj = float(best_obj)

    step = model.objective_step
    if step is not None and step <= 0:
        step = None

    def gap_tol(obj):
        return 0 if exact else tol.relative_gap * max(1.0, abs(obj))

    def cutoff():
        # Nodes whose bound reaches this value cannot improve the incumbent.
        if best_obj is None:
            return None
        if step is not None:
            # the next better value is best - step; stop halfway to it
            return conv(best_obj) - conv(step) / 2
        return conv(best_obj) - gap_tol(best_obj) if not exact else conv(best_obj)

    def on_grid(bound):
        """Round a valid lower bound up to the objective grid."""
        if step is None or bound is None or bound == -math.inf:
            return bound
        if exact:
            q = Fraction(bound) / step
            return conv(math.ceil(q) * step)
        g = float(step)
        return math.ceil(bound / g - 1e-6) * g

    def extract(lp):
        vals = lp.values()
        out = []
        for j in range(n):
            v = vals[j]
            if exact:
                out.append(_exact_value(v))
            elif integer[j]:
                out.append(int(round(v)))
            else:
                out.append(float(v))
        return out

    def fractional(lp):
        """(distance, column) pairs of integer columns off the grid."""
        out = []
        for j in int_cols:
            v = lp.z[j]
            f = v - math.floor(v)
            dist = min(f, 1 - f)
            if dist > itol:
                out.append((dist, int(j)))
        return out

    def dive(start_lp):
        """Depth-first plunge: fix the nearest-to-integral column to its nearest
        value (the other side on backtrack) until the LP is integral or the
        budget of LP solves runs out."""
        budget = DIVE_SOLVES_PER_COLUMN * len(int_cols) + 10
        used = 0
        stack = [(start_lp, None)]
        while stack and budget > 0:
            lp, fix = stack.pop()
            if fix is not None:
                j, target = fix
                lp = lp.copy()
                lp.set_bounds(j, conv(target), conv(target))
                before = lp.iterations
                cut = cutoff()
                st = lp.solve(cutoff=None if cut is None else cut - const, max_iter=lp.iterations + 50 * (len(int_cols) + 10))
                used += lp.iterations - before
                budget -= 1
                if st != simplex.OPTIMAL:
                    continue
            frac = fractional(lp)
            if not frac:
                return lp, used
            _dist, j = min(frac)
            v = lp.z[j]
            near = math.floor(v + (mpq(1, 2) if exact else 0.5))
            far = math.floor(v) if near > v else math.floor(v) + 1
            for target in (far, near):
                if lp.lb[j] <= target <= lp.ub[j]:
                    stack.append((lp, (j, target)))
        return None, used

    def try_callback(lp):
        nonlocal best_obj, best_values
        if heuristic is None:
            return
        point = [float(v) for v in lp.z[:n]]
        for cand in heuristic(point) or ():
            vals = _check_incumbent(model, cand, tol)
            if vals is None:
                continue
            value = model.objective_value(vals)
            value = value if exact else float(value)
            if best_obj is None or value < best_obj:
                best_obj, best_values = value, vals
                log.debug("heuristic incumbent %s at node %d", best_obj, nodes)

    def try_dive(lp):
        nonlocal best_obj, best_values, iterations
        found, used = dive(lp)
        iterations += used
        if found is None:
            return
        vals = extract(found)
        if _check_incumbent(model, dict(zip(model.var_names, vals)), tol) is None:
            return
        value = model.objective_value(vals)
        value = value if exact else float(value)
        if best_obj is None or value < best_obj:
            best_obj, best_values = value, vals
            log.debug("dive incumbent %s at node %d", best_obj, nodes)

    const = conv(model.obj_constant)
    root = simplex.DualSimplex(data, lb=lb, ub=ub)
    if int_cols.size and CUT_ROUNDS:
        root, added, used = _root_cuts(model, root, integer, exact)
        iterations_before = used
        if added:
            data = root.data
            log.debug("root: %d Gomory cuts", added)
    else:
        iterations_before = 0
    counter = itertools.count()
    heap: list = []
    hot: OrderedDict[int, _Snapshot] = OrderedDict()
    small = root.T.nbytes <= SMALL_TABLEAU_BYTES
    nodes = 0
    iterations = iterations_before
    status_note = []
    heapq.heappush(heap, (-math.inf, 0, next(counter), None, None))

    while heap:
        if nodes >= limits.nodes or time.perf_counter() - start > limits.time:
            bound = on_grid(min([h[0] for h in heap]))
            if bound == -math.inf:
                bound = None
            if best_obj is not None and bound is not None:
                bound = min(bound, best_obj)
            status = NODE_LIMIT if nodes >= limits.nodes else TIME_LIMIT
            return finish(status, best_values, best_obj, bound, nodes, iterations, status_note)
        parent_bound, neg_depth, _seq, snap, branch = heapq.heappop(heap)
        cut = cutoff()
        if cut is not None and parent_bound != -math.inf and (parent_bound >= cut):
            continue
        if snap is None:
            lp = root
        else:
            lp = snap.restore(data)
            j, new_lo, new_hi = branch
            lp.set_bounds(j, new_lo, new_hi)
        before = lp.iterations
        st = lp.solve(cutoff=None if cut is None else cut - const)
        iterations += lp.iterations - before
        nodes += 1
        if st == simplex.UNBOUNDED:
            if snap is None:
                return finish(UNBOUNDED, nodes=nodes, iters=iterations)
            continue
        if st in (simplex.INFEASIBLE, simplex.CUTOFF):
            continue
        obj = lp.objective() + const
        if cut is not None and obj >= cut:
            continue
        z = lp.z
        frac_best, pick = None, None
        for j in int_cols:
            v = z[j]
            f = v - math.floor(v)
            dist = min(f, 1 - f)
            if dist > itol and (frac_best is None or dist > frac_best):
                frac_best, pick = dist, int(j)
        if pick is not None and (nodes == 1 or nodes % DIVE_EVERY == 0):
            gap_open = best_obj is None or on_grid(obj) < cutoff()
            if gap_open:
                try_callback(lp)
            if best_obj is None or on_grid(obj) < cutoff():
                try_dive(lp)
                cut = cutoff()
                if cut is not None and obj >= cut:
                    continue
        if pick is None:
            vals = extract(lp)
            value = model.objective_value(vals)
            best_obj = value if exact else float(value)
            best_values = vals
            log.debug("incumbent %s at node %d", best_obj, nodes)
            continue
        v = z[pick]
        fl = math.floor(v)
        holder = _Snapshot(lp)
        if not small:
            hot[id(holder)] = holder
            while len(hot) > HOT_SNAPSHOTS:
                _k, old = hot.popitem(last=False)
                old.shrink()
        down = (pick, lp.lb[pick], conv(fl))
        up = (pick, conv(fl + 1), lp.ub[pick])
        # float keys are rounded so that equal bounds tie and the deeper node wins
        key = obj if exact else round(float(obj), 7)
        heapq.heappush(heap, (key, neg_depth - 1, next(counter), holder, up))
        heapq.heappush(heap, (key, neg_depth - 1, next(counter), holder, down))

    if best_obj is None:
        return finish(INFEASIBLE, nodes=nodes, iters=iterations)
    return finish(OPTIMAL, best_values, best_obj, best_obj, nodes, iterations, status_note)


def _root_cuts(model: MILPModel, root: simplex.DualSimplex, integer: np.ndarray, exact: bool):
    """Rounds of Gomory cuts at the root; returns the strengthened, solved root LP."""
    used = 0
    st = root.solve()
    used += root.iterations
    if st != simplex.OPTIMAL:
        return root, 0, used
    mask = np.concatenate([integer, gomory.integer_logicals(model, integer)])
    itol = 0 if exact else 1e-6
    added = 0
    cap = max(CUTS_PER_ROUND, root.m // 2)
    for _round in range(CUT_ROUNDS):
        frac = any(min(v - math.floor(v), math.floor(v) + 1 - v) > itol for v in root.z[: root.n][integer])
        if not frac or added >= cap:
            break
        cuts = gomory.gmi_cuts(root, mask, min(CUTS_PER_ROUND, cap - added))
        if not cuts:
            break
        data = root.data.extended(cuts)
        lb = np.concatenate([root.lb, data.lb[root.n + root.m:]])
        ub = np.concatenate([root.ub, data.ub[root.n + root.m:]])
        trial = simplex.DualSimplex(data, lb=lb, ub=ub)
        with np.errstate(all="ignore"):
            st = trial.solve()
        used += trial.iterations
        if st != simplex.OPTIMAL or not trial.finite():
            log.debug("cut round rejected: LP status %s", st)
            break
        before, after = root.objective(), trial.objective()
        log.debug("cut round %d: %d cuts, bound %s -> %s", _round + 1, len(cuts), before, after)
        mask = np.concatenate([mask, np.zeros(len(cuts), dtype=bool)])
        root = trial
        added += len(cuts)
        if after - before <= (0 if exact else 1e-6 * max(1.0, abs(float(before)))):
            break
    root.iterations = 0
    return root, added, used

