"""Column/row storage for mixed-integer linear programs."""

from __future__ import annotations

import math
from array import array
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"
VAR_KINDS = (CONTINUOUS, INTEGER, BINARY)

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

INF = math.inf


class ModelError(ValueError):
    pass


def _num(v):
    """Keep ints/Fractions exact; infinities stay floats."""
    if isinstance(v, bool):
        raise ModelError("booleans are not valid coefficients")
    if isinstance(v, (int, Fraction)):
        return v
    if isinstance(v, float):
        if math.isinf(v):
            return v
        if math.isnan(v):
            raise ModelError("NaN in model data")
        fr = Fraction(repr(v))
        return fr.numerator if fr.denominator == 1 else fr
    fr = Fraction(int(v.numerator), int(v.denominator))
    return fr.numerator if fr.denominator == 1 else fr


class MILPModel:
    """Minimisation MILP with named columns and tagged rows.

    Rows are stored in compressed form (one flat column/coefficient list with
    row offsets) because compiled models can reach millions of rows.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list = []
        self.ub: list = []
        self.kind: list[str] = []
        self._col: dict[str, int] = {}
        self.row_start = array("q", [0])
        self.row_cols = array("i")
        self.row_coefs: list = []
        self.sense: list[str] = []
        self.rhs: list = []
        self.row_names: list[str] = []
        self.row_tags: list[str] = []
        self._row_names: set[str] = set()
        self.objective: dict[int, object] = {}
        self.obj_constant = 0
        # Positive value g when every integer-feasible objective value is a
        # multiple of g; branch-and-bound then rounds bounds up to that grid.
        self.objective_step = None
        self.metadata: dict = {}

    # -- columns ------------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.sense)

    def add_var(self, name: str, lb=0, ub=INF, kind: str = CONTINUOUS) -> int:
        if name in self._col:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind not in VAR_KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        lb, ub = _num(lb), _num(ub)
        if kind == BINARY:
            lb = max(lb, 0)
            ub = min(ub, 1)
        if lb > ub:
            raise ModelError(f"variable {name!r}: lower bound {lb} exceeds upper bound {ub}")
        col = len(self.var_names)
        self._col[name] = col
        self.var_names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.kind.append(kind)
        return col

    def col(self, name: str) -> int:
        try:
            return self._col[name]
        except KeyError:
            raise ModelError(f"unknown variable {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._col

    def set_bounds(self, col: int, lb=None, ub=None) -> None:
        if lb is not None:
            self.lb[col] = _num(lb)
        if ub is not None:
            self.ub[col] = _num(ub)
        if self.lb[col] > self.ub[col]:
            raise ModelError(f"variable {self.var_names[col]!r}: empty bound interval")

    def is_integer(self, col: int) -> bool:
        return self.kind[col] != CONTINUOUS

    # -- rows ---------------------------------------------------------------
    def _resolve(self, key) -> int:
        if isinstance(key, str):
            return self.col(key)
        if not 0 <= key < len(self.var_names):
            raise ModelError(f"column index {key} out of range")
        return key

    def _canonical(self, terms) -> dict[int, object]:
        merged: dict[int, object] = {}
        for key, coef in terms:
            c = self._resolve(key)
            merged[c] = merged.get(c, 0) + _num(coef)
        return {c: v for c, v in merged.items() if v != 0}

    def add_constraint(self, terms: Iterable, sense: str, rhs, name: str | None = None, tag: str = "") -> int:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        row = len(self.sense)
        if name is None:
            name = f"r{row}"
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        merged = self._canonical(terms)
        self._row_names.add(name)
        for c, v in merged.items():
            self.row_cols.append(c)
            self.row_coefs.append(v)
        self.row_start.append(len(self.row_cols))
        self.sense.append(sense)
        self.rhs.append(_num(rhs))
        self.row_names.append(name)
        self.row_tags.append(tag)
        return row

    def row(self, r: int) -> tuple[list[int], list]:
        a, b = self.row_start[r], self.row_start[r + 1]
        return list(self.row_cols[a:b]), self.row_coefs[a:b]

    def rows(self):
        for r in range(self.num_rows):
            cols, coefs = self.row(r)
            yield r, cols, coefs, self.sense[r], self.rhs[r]

    # -- objective ----------------------------------------------------------
    def set_objective(self, terms: Iterable, constant=0) -> None:
        self.objective = self._canonical(terms)
        self.obj_constant = _num(constant)

    def objective_value(self, values: Mapping[int, object] | list):
        get = values.__getitem__
        return self.obj_constant + sum(c * get(j) for j, c in self.objective.items())

    # -- checks -------------------------------------------------------------
    def validate(self) -> None:
        for j, name in enumerate(self.var_names):
            if self.lb[j] > self.ub[j]:
                raise ModelError(f"variable {name!r} has empty bounds")
            if self.kind[j] == BINARY and (self.lb[j] < 0 or self.ub[j] > 1):
                raise ModelError(f"binary {name!r} has bounds outside [0,1]")

    def row_activity(self, r: int, values) -> object:
        cols, coefs = self.row(r)
        return sum(v * values[c] for c, v in zip(cols, coefs))

    def violations(self, values, tol=0) -> list[tuple[str, object]]:
        """(name, amount) for every violated bound, row, or integrality requirement."""
        out = []
        for j in range(self.num_vars):
            v = values[j]
            if v < self.lb[j] - tol or v > self.ub[j] + tol:
                out.append((self.var_names[j], v))
            if self.kind[j] != CONTINUOUS and abs(v - round(v)) > tol:
                out.append((self.var_names[j], v))
        for r, cols, coefs, sense, rhs in self.rows():
            act = sum(v * values[c] for c, v in zip(cols, coefs))
            if (sense == LE and act > rhs + tol) or (sense == GE and act < rhs - tol) or (
                sense == EQ and abs(act - rhs) > tol
            ):
                out.append((self.row_names[r], act - rhs))
        return out

    def statistics(self) -> dict:
        return {
            "variables": self.num_vars,
            "constraints": self.num_rows,
            "nonzeros": len(self.row_cols),
            "by_kind": dict(Counter(self.kind)),
            "by_tag": dict(Counter(self.row_tags)),
        }


@dataclass(frozen=True)
class ToleranceConfig:
    """``rational`` solves exactly; ``float`` uses the stated tolerances."""

    mode: str = "float"
    integrality: float = 1e-6
    feasibility: float = 1e-6
    relative_gap: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("rational", "float"):
            raise ValueError(f"unknown arithmetic mode {self.mode!r}")

    @property
    def exact(self) -> bool:
        return self.mode == "rational"


@dataclass(frozen=True)
class SolveLimits:
    time: float = 3600.0
    nodes: int = 1_000_000


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NODE_LIMIT = "node-limit"
TIME_LIMIT = "time-limit"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, NODE_LIMIT, TIME_LIMIT)


@dataclass
class Solution:
    status: str
    values: dict[str, object] = field(default_factory=dict)
    objective: object = None
    bound: object = None
    nodes: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def has_incumbent(self) -> bool:
        return self.objective is not None

    def __getitem__(self, name: str):
        return self.values[name]
