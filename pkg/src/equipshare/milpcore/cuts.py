"""Gomory mixed-integer cuts read off an optimal dense tableau.

A basic integer column with a fractional value gives a row
z_B + sum_N a_j s_j = v in the nonbasic distances s_j from their bounds; the
mixed-integer rounding of that row is a valid inequality that cuts off the
current vertex. Logical columns are substituted back by their row activity,
so every cut is a plain inequality over the structural columns.
"""

from __future__ import annotations

import math

import numpy as np
from gmpy2 import mpq

from . import simplex

# float-mode safeguards
MIN_FRACTION = 1e-3
MAX_DYNAMISM = 1e6
MIN_VIOLATION = 1e-6


def integer_logicals(model, integer: np.ndarray) -> np.ndarray:
    """Rows whose activity is integral on every integer point."""
    out = np.zeros(model.num_rows, dtype=bool)
    for r, cols, coefs, _s, rhs in model.rows():
        out[r] = all(integer[c] and v == int(v) for c, v in zip(cols, coefs)) and rhs == int(rhs)
    return out


def _frac(v):
    return v - math.floor(v)


def gmi_cuts(lp: simplex.DualSimplex, int_mask: np.ndarray, max_cuts: int):
    """Cuts (coefs over structural columns, rhs) meaning coefs . x >= rhs.

    ``int_mask`` flags integer columns among all n + m columns of ``lp``.
    """
    exact = lp.exact
    n, m = lp.n, lp.m
    zero = mpq(0) if exact else 0.0
    one = mpq(1) if exact else 1.0
    A = lp.data.A
    candidates = []
    for r in range(m):
        k = int(lp.head[r])
        if not int_mask[k]:
            continue
        f0 = _frac(lp.z[k])
        dist = min(f0, 1 - f0)
        if dist <= (0 if exact else MIN_FRACTION):
            continue
        candidates.append((-dist, r))
    candidates.sort()
    cuts = []
    x_now = lp.z[:n]
    for _neg, r in candidates:
        if len(cuts) >= max_cuts:
            break
        cut = _cut_from_row(lp, r, int_mask, A, n, exact, zero, one)
        if cut is None:
            continue
        coefs, rhs = cut
        viol = rhs - coefs.dot(x_now)
        if exact:
            if viol <= 0:
                continue
        else:
            scale = float(np.max(np.abs(coefs)))
            if scale == 0 or viol / scale <= MIN_VIOLATION:
                continue
        cuts.append(cut)
    return cuts


def _cut_from_row(lp, r, int_mask, A, n, exact, zero, one):
    row = lp.T[r]
    k = int(lp.head[r])
    f0 = _frac(lp.z[k])
    nz = np.flatnonzero(row)
    coefs = np.full(n, zero, dtype=object if exact else float)
    rhs = one
    for j in nz:
        j = int(j)
        if j == k:
            continue
        st = lp.state[j]
        if st == simplex.BASIC:
            continue
        t = row[j]
        if st == simplex.FREE or lp.artificial[j]:
            return None
        if st == simplex.LOWER:
            a, bound, sign = t, lp.lb[j], 1
        else:
            a, bound, sign = -t, lp.ub[j], -1
        if int_mask[j] and bound == math.floor(bound):
            fj = _frac(a)
            pi = fj / f0 if fj <= f0 else (1 - fj) / (1 - f0)
        else:
            pi = a / f0 if a >= 0 else -a / (1 - f0)
        if pi == 0:
            continue
        # pi * s_j with s_j = z_j - l_j (lower) or u_j - z_j (upper)
        rhs = rhs + sign * pi * bound
        if j < n:
            coefs[j] += sign * pi
        else:
            coefs += (sign * pi) * A[j - n]
    if exact:
        return coefs, rhs
    return _clean(coefs, rhs, lp)


def _clean(coefs, rhs, lp):
    """Drop negligible coefficients (relaxing the rhs) and reject badly scaled cuts."""
    big = float(np.max(np.abs(coefs))) if coefs.size else 0.0
    if big == 0 or not math.isfinite(big):
        return None
    tiny = np.flatnonzero((np.abs(coefs) > 0) & (np.abs(coefs) < big / MAX_DYNAMISM))
    for j in tiny:
        c = coefs[j]
        lo, hi = lp.lb[j], lp.ub[j]
        worst = max(c * lo, c * hi)
        if not math.isfinite(worst):
            return None
        rhs -= worst
        coefs[j] = 0.0
    coefs = coefs / big
    rhs = rhs / big
    # leave room for round-off in the tableau
    rhs -= 1e-9 * (1.0 + abs(rhs))
    return coefs, rhs
