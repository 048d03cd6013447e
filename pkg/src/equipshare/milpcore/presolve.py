"""Root bound tightening by activity propagation."""

from __future__ import annotations

import math
from fractions import Fraction

from .model import CONTINUOUS, EQ, GE, LE, MILPModel

INF = math.inf


class PresolveInfeasible(Exception):
    pass


def _row_terms(lo, hi, cols, coefs, use_min: bool):
    """Finite part of the extreme activity and the columns contributing an infinite part."""
    total = 0
    infinite = []
    for c, a in zip(cols, coefs):
        pick_lower = (a > 0) == use_min
        b = lo[c] if pick_lower else hi[c]
        if b in (INF, -INF):
            infinite.append(c)
        else:
            total += a * b
    return total, infinite


def tighten_bounds(model: MILPModel, lb=None, ub=None, max_passes: int = 10):
    """Return (lb, ub) lists implied by the rows; raise PresolveInfeasible on a proof of infeasibility.

    Integer columns get rounded bounds. Continuous columns are only tightened by
    a meaningful margin so propagation cycles stop quickly.
    """
    lo = list(model.lb if lb is None else lb)
    hi = list(model.ub if ub is None else ub)
    integer = [k != CONTINUOUS for k in model.kind]
    rows = [(model.row(r), model.sense[r], model.rhs[r]) for r in range(model.num_rows)]

    def update(c, new, upper: bool) -> bool:
        if integer[c]:
            new = math.floor(new + Fraction(1, 10**9)) if upper else math.ceil(new - Fraction(1, 10**9))
        cur = hi[c] if upper else lo[c]
        if cur not in (INF, -INF):
            margin = 0 if integer[c] else Fraction(1, 10**7) * (1 + abs(cur))
            if (upper and new >= cur - margin) or (not upper and new <= cur + margin):
                return False
        if upper:
            hi[c] = new
        else:
            lo[c] = new
        if lo[c] > hi[c]:
            if integer[c] or lo[c] - hi[c] > Fraction(1, 10**9):
                raise PresolveInfeasible(f"column {model.var_names[c]} has empty bounds")
            hi[c] = lo[c]
        return True

    for _ in range(max_passes):
        changed = False
        for (cols, coefs), sense, rhs in rows:
            if not cols:
                if (sense == LE and rhs < 0) or (sense == GE and rhs > 0) or (sense == EQ and rhs != 0):
                    raise PresolveInfeasible("empty row with unsatisfiable right-hand side")
                continue
            if sense in (LE, EQ):
                base, inf_cols = _row_terms(lo, hi, cols, coefs, use_min=True)
                if not inf_cols and base > rhs:
                    raise PresolveInfeasible("row minimum activity exceeds its upper limit")
                if len(inf_cols) <= 1:
                    for c, a in zip(cols, coefs):
                        if inf_cols and c != inf_cols[0]:
                            continue
                        own = 0 if inf_cols else a * (lo[c] if a > 0 else hi[c])
                        slack = rhs - (base - own)
                        changed |= update(c, Fraction(slack) / a, upper=a > 0)
            if sense in (GE, EQ):
                base, inf_cols = _row_terms(lo, hi, cols, coefs, use_min=False)
                if not inf_cols and base < rhs:
                    raise PresolveInfeasible("row maximum activity below its lower limit")
                if len(inf_cols) <= 1:
                    for c, a in zip(cols, coefs):
                        if inf_cols and c != inf_cols[0]:
                            continue
                        own = 0 if inf_cols else a * (hi[c] if a > 0 else lo[c])
                        slack = rhs - (base - own)
                        changed |= update(c, Fraction(slack) / a, upper=a < 0)
        if not changed:
            break
    return lo, hi
