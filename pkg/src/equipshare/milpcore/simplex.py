"""Bounded dual simplex on a dense tableau.

The LP is min c'x over l <= x <= u with row activities r = Ax carried as
logical columns, so the working system is [A | -I] z = 0 with bounds on all
of z. The starting basis is all-logical; structural columns start at the
bound their cost sign prefers, which makes the start dual feasible and the
dual simplex the only phase needed. Branch-and-bound then changes bounds and
re-enters the same loop.

One implementation serves both arithmetic modes: float64 arrays, or object
arrays of exact rationals (gmpy2.mpq).
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
from gmpy2 import mpq

from .model import EQ, GE, LE, MILPModel

BASIC, LOWER, UPPER, FREE = 0, 1, 2, 3

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
CUTOFF = "cutoff"
ITER_LIMIT = "iteration-limit"

# Stand-in for a missing bound on the side a column starts at; reaching it at
# optimality is reported as unboundedness.
ARTIFICIAL_BOUND = 10**9


def _to_exact(v):
    if isinstance(v, float):
        if math.isinf(v):
            return v
        return mpq(repr(v))
    if isinstance(v, int):
        return mpq(v)
    return mpq(v.numerator, v.denominator)


class LPData:
    """Dense arrays of a model's LP relaxation in one arithmetic mode."""

    def __init__(self, model: MILPModel, exact: bool):
        self.exact = exact
        m, n = model.num_rows, model.num_vars
        self.m, self.n = m, n
        conv = _to_exact if exact else float
        dtype = object if exact else float
        zero = mpq(0) if exact else 0.0
        A = np.full((m, n), zero, dtype=dtype)
        for r, cols, coefs, _s, _b in model.rows():
            for c, v in zip(cols, coefs):
                A[r, c] = conv(v)
        self.A = A
        c = np.full(n + m, zero, dtype=dtype)
        for j, v in model.objective.items():
            c[j] = conv(v)
        self.c = c
        lb = [conv(v) for v in model.lb]
        ub = [conv(v) for v in model.ub]
        for r in range(m):
            rhs = conv(model.rhs[r])
            s = model.sense[r]
            lb.append(rhs if s in (GE, EQ) else -math.inf)
            ub.append(rhs if s in (LE, EQ) else math.inf)
        self.lb = np.array(lb, dtype=dtype)
        self.ub = np.array(ub, dtype=dtype)
        self._full = None

    def extended(self, cuts) -> "LPData":
        """Copy with rows coefs . x >= rhs appended after the existing ones."""
        out = LPData.__new__(LPData)
        out.exact = self.exact
        out.n = self.n
        out.m = self.m + len(cuts)
        dtype = object if self.exact else float
        inf = math.inf
        out.A = np.vstack([self.A] + [np.asarray(c, dtype=dtype).reshape(1, -1) for c, _r in cuts])
        zero = mpq(0) if self.exact else 0.0
        out.c = np.concatenate([self.c, np.full(len(cuts), zero, dtype=dtype)])
        out.lb = np.concatenate([self.lb, np.array([r for _c, r in cuts], dtype=dtype)])
        out.ub = np.concatenate([self.ub, np.array([inf] * len(cuts), dtype=dtype)])
        out._full = None
        return out

    @property
    def full(self):
        """[A | -I] in float mode, built on first use."""
        if self._full is None:
            self._full = np.hstack([self.A, -np.identity(self.m)])
        return self._full


class DualSimplex:
    def __init__(self, data: LPData, lb=None, ub=None, dual_tol=1e-9, primal_tol=1e-9, pivot_tol=1e-7):
        self.data = data
        self.exact = data.exact
        m, n = data.m, data.n
        self.m, self.n, self.N = m, n, n + m
        self.zero = mpq(0) if self.exact else 0.0
        self.one = mpq(1) if self.exact else 1.0
        dtype = object if self.exact else float
        self.lb = (data.lb if lb is None else lb).copy()
        self.ub = (data.ub if ub is None else ub).copy()
        self.c = data.c
        if self.exact:
            self.dual_tol = self.primal_tol = self.pivot_tol = 0
        else:
            self.dual_tol, self.primal_tol, self.pivot_tol = dual_tol, primal_tol, pivot_tol
        T = np.empty((m, self.N), dtype=dtype)
        T[:, :n] = -data.A
        T[:, n:] = np.identity(m, dtype=float).astype(dtype) if not self.exact else self._exact_identity(m)
        self.T = T
        self.head = np.arange(n, n + m)
        self.state = np.full(self.N, LOWER, dtype=np.int8)
        self.state[n:] = BASIC
        self.artificial = np.zeros(self.N, dtype=bool)
        self.z = np.full(self.N, self.zero, dtype=dtype)
        self.d = self.c.copy()
        for j in range(n):
            self._place_nonbasic(j)
        self.z[n:] = data.A.dot(self.z[:n]) if m else self.z[n:]
        self.iterations = 0
        self.since_refactor = 0

    @staticmethod
    def _exact_identity(m):
        eye = np.full((m, m), mpq(0), dtype=object)
        for i in range(m):
            eye[i, i] = mpq(1)
        return eye

    # -- bookkeeping --------------------------------------------------------
    def _place_nonbasic(self, j):
        """Put nonbasic column j at the bound its reduced cost favours."""
        lo, hi, dj = self.lb[j], self.ub[j], self.d[j]
        self.artificial[j] = False
        if dj > 0 or (dj == 0 and lo != -math.inf):
            if lo == -math.inf:
                self.z[j] = -ARTIFICIAL_BOUND * self.one
                self.artificial[j] = True
            else:
                self.z[j] = lo
            self.state[j] = LOWER
        elif dj < 0 or hi != math.inf:
            if hi == math.inf:
                self.z[j] = ARTIFICIAL_BOUND * self.one
                self.artificial[j] = True
            else:
                self.z[j] = hi
            self.state[j] = UPPER
        else:
            self.z[j] = self.zero
            self.state[j] = FREE

    def objective(self):
        return self.c[: self.n].dot(self.z[: self.n])

    def values(self):
        return self.z[: self.n]

    def copy(self) -> "DualSimplex":
        other = DualSimplex.__new__(DualSimplex)
        other.__dict__.update(self.__dict__)
        for attr in ("lb", "ub", "T", "head", "state", "artificial", "z", "d"):
            setattr(other, attr, getattr(self, attr).copy())
        return other

    def set_bounds(self, j, lo, hi):
        """Change the bounds of column j, keeping the basis dual feasible."""
        self.lb[j], self.ub[j] = lo, hi
        st = self.state[j]
        if st == BASIC:
            return
        old = self.z[j]
        if st == LOWER and lo != -math.inf:
            new = lo
        elif st == UPPER and hi != math.inf:
            new = hi
        else:
            self._place_nonbasic(j)
            new = self.z[j]
        if new != old:
            self.z[j] = new
            delta = new - old
            rows = np.flatnonzero(self.T[:, j])
            if rows.size:
                self.z[self.head[rows]] -= self.T[rows, j] * delta

    # -- float mode maintenance --------------------------------------------
    def refactor(self):
        """Rebuild the tableau, basic values and reduced costs from the basis."""
        if self.exact:
            return
        m = self.m
        M = self.data.full
        lu = scipy.linalg.lu_factor(M[:, self.head], check_finite=False)
        self.T = scipy.linalg.lu_solve(lu, M, check_finite=False)
        self.T[np.abs(self.T) < 1e-12] = 0.0
        self.T[:, self.head] = np.identity(m)
        nonbasic = self.state != BASIC
        zb = -self.T[:, nonbasic].dot(self.z[nonbasic])
        self.z[self.head] = zb
        y = scipy.linalg.lu_solve(lu, self.c[self.head], trans=1, check_finite=False)
        self.d = self.c - M.T.dot(y)
        self.d[self.head] = 0.0
        self.since_refactor = 0
        self._restore_dual_feasibility()

    def finite(self) -> bool:
        if self.exact:
            return True
        return bool(np.all(np.isfinite(self.T)) and np.all(np.isfinite(self.d)) and not np.any(np.isnan(self.z)))

    def drifted(self, tol: float = 1e-9) -> bool:
        """True when the row activities no longer match the structural values."""
        if self.exact or self.m == 0:
            return False
        res = self.data.A.dot(self.z[: self.n]) - self.z[self.n:]
        scale = 1.0 + float(np.max(np.abs(self.z[np.isfinite(self.z)]), initial=0.0))
        return float(np.max(np.abs(res))) > tol * scale

    def _row_confirms_infeasible(self, r, sign) -> bool:
        """Recompute tableau row r from the basis and repeat the entering test on it."""
        M = self.data.full
        B = M[:, self.head]
        e = np.zeros(self.m)
        e[r] = 1.0
        # the slack block of M is a signed identity, so the tableau already
        # carries row r of the basis inverse; trust it if its residual is small
        u = self.T[r, self.n:] / np.diagonal(M[:, self.n:])
        if np.max(np.abs(u.dot(B) - e)) > 1e-9:
            try:
                u = scipy.linalg.solve(B.T, e, check_finite=False)
            except (scipy.linalg.LinAlgError, ValueError):
                return False
        row = u.dot(M)
        row[np.abs(row) < 1e-12] = 0.0
        # basic values from the nonbasic ones, so the violation is checked fresh too
        nonbasic = self.state != BASIC
        zr = -row[nonbasic].dot(self.z[nonbasic])
        leave = self.head[r]
        if sign > 0 and not zr < self.lb[leave] - 1e-7:
            return False
        if sign < 0 and not zr > self.ub[leave] + 1e-7:
            return False
        saved = self.T[r].copy()
        self.T[r] = row
        try:
            return self._pick_entering(r, sign, False) is None
        finally:
            self.T[r] = saved

    def _restore_dual_feasibility(self):
        tol = self.dual_tol
        for j in np.flatnonzero(self.state != BASIC):
            st, dj = self.state[j], self.d[j]
            if st == LOWER and dj < -tol and self.ub[j] != math.inf:
                self._move(j, self.ub[j], UPPER)
            elif st == UPPER and dj > tol and self.lb[j] != -math.inf:
                self._move(j, self.lb[j], LOWER)

    def _move(self, j, value, state):
        delta = value - self.z[j]
        self.z[j] = value
        self.state[j] = state
        rows = np.flatnonzero(self.T[:, j])
        if rows.size:
            self.z[self.head[rows]] -= self.T[rows, j] * delta

    # -- main loop ----------------------------------------------------------
    def _pick_leaving(self, bland: bool):
        zb = self.z[self.head]
        below = self.lb[self.head] - zb
        above = zb - self.ub[self.head]
        viol = np.maximum(below, above) if not self.exact else np.array(
            [max(a, b) for a, b in zip(below, above)], dtype=object
        )
        tol = self.primal_tol
        cand = np.flatnonzero(viol > tol)
        if cand.size == 0:
            return None, 0
        if bland:
            r = int(cand[np.argmin(self.head[cand])])
        else:
            r = int(cand[np.argmax(viol[cand])]) if not self.exact else int(max(cand, key=lambda i: (viol[i], -i)))
        return r, (1 if below[r] > tol else -1)

    def _pick_entering(self, r, sign, bland: bool):
        row = self.T[r]
        st = self.state
        ptol = self.pivot_tol
        if sign > 0:
            elig = ((st == LOWER) & (row < -ptol)) | ((st == UPPER) & (row > ptol))
        else:
            elig = ((st == LOWER) & (row > ptol)) | ((st == UPPER) & (row < -ptol))
        elig |= (st == FREE) & ((row > ptol) | (row < -ptol))
        elig &= self.lb != self.ub
        cand = np.flatnonzero(elig)
        if cand.size == 0:
            return None
        a = np.abs(row[cand])
        dd = np.abs(self.d[cand])
        if self.exact:
            ratios = dd / a
            best = min(ratios)
            ties = cand[ratios == best]
            if bland or ties.size == 1:
                return int(ties[0])
            sub = np.abs(row[ties])
            return int(ties[int(np.argmax(sub))])
        # Harris two-pass ratio test
        bound = np.min((dd + self.dual_tol) / a)
        ok = dd / a <= bound
        if bland:
            return int(cand[ok][0])
        return int(cand[ok][int(np.argmax(a[ok]))])

    def solve(self, cutoff=None, max_iter: int = 1_000_000) -> str:
        # Degenerate pivots are routine on max-type objectives; Bland's rule
        # only takes over after a long stall, since it moves in tiny steps.
        degenerate, stall = 0, max(500, self.m)
        while True:
            bland = degenerate > stall
            r, sign = self._pick_leaving(bland)
            if r is None:
                if self.since_refactor and self.drifted():
                    self.refactor()
                    if self._pick_leaving(False)[0] is not None:
                        continue
                if np.any(self.artificial & (self.state != BASIC) & (self.d != 0)):
                    return UNBOUNDED
                return OPTIMAL
            if cutoff is not None and not self.artificial.any() and self.objective() >= cutoff:
                return CUTOFF
            if self.iterations >= max_iter:
                return ITER_LIMIT
            q = self._pick_entering(r, sign, bland)
            if q is None:
                if not self.exact and self.since_refactor:
                    if self._row_confirms_infeasible(r, sign):
                        return INFEASIBLE
                    self.refactor()
                    continue
                return INFEASIBLE
            leave = int(self.head[r])
            target = self.lb[leave] if sign > 0 else self.ub[leave]
            row = self.T[r]
            piv = row[q]
            theta_d = self.d[q] / piv
            if theta_d != 0:
                nz = np.flatnonzero(row)
                self.d[nz] -= theta_d * row[nz]
                degenerate = 0
            else:
                degenerate += 1
            self.d[q] = self.zero
            self.d[leave] = -theta_d
            theta_p = (self.z[leave] - target) / piv
            col = self.T[:, q].copy()
            rows = np.flatnonzero(col)
            self.z[self.head[rows]] -= theta_p * col[rows]
            self.z[q] = self.z[q] + theta_p
            self.z[leave] = target
            self.artificial[q] = False
            # pivot
            newrow = row / piv
            newrow[q] = self.one
            self.T[r] = newrow
            others = rows[rows != r]
            if others.size:
                nzc = np.flatnonzero(newrow)
                self.T[np.ix_(others, nzc)] -= np.outer(col[others], newrow[nzc])
                self.T[others, q] = self.zero
            self.head[r] = q
            self.state[q] = BASIC
            self.state[leave] = LOWER if sign > 0 else UPPER
            self.iterations += 1
            self.since_refactor += 1
            if not self.exact and self.since_refactor >= 100:
                self.refactor()


def solve_lp(model: MILPModel, exact: bool = True):
    """Convenience wrapper returning (status, objective, values) for the relaxation."""
    lp = DualSimplex(LPData(model, exact))
    status = lp.solve()
    if status != OPTIMAL:
        return status, None, None
    return status, lp.objective(), list(lp.values())
