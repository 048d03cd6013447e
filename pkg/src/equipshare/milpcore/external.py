"""Adapter contract for solving an exported LP file with an outside program.

The program is given as an argument template containing ``{lp}`` and
``{sol}``. It must write a solution file of the form::

    status optimal          (optional; optimal/infeasible/unbounded/time-limit/node-limit)
    objective 12.5
    x_1_2_1 3
    ...
"""

from __future__ import annotations

import logging
import math
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import bnb
from .lpformat import save_lp
from .model import INFEASIBLE, OPTIMAL, STATUSES, MILPModel, Solution, SolveLimits, ToleranceConfig

log = logging.getLogger(__name__)

HIGHS_COMMAND = (sys.executable, "-m", "equipshare.milpcore.highs_adapter", "{lp}", "{sol}")


class AdapterError(RuntimeError):
    pass


def parse_solution_text(text: str) -> Solution:
    status, objective, values = None, None, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise AdapterError(f"solution line {lineno}: expected two fields, got {line!r}")
        key, val = parts
        if key == "status":
            if val not in STATUSES:
                raise AdapterError(f"solution line {lineno}: unknown status {val!r}")
            status = val
            continue
        try:
            num = Fraction(val)
        except (ValueError, ZeroDivisionError):
            raise AdapterError(f"solution line {lineno}: bad number {val!r}") from None
        if key == "objective":
            objective = num
        else:
            values[key] = num
    if status is None:
        if objective is None:
            raise AdapterError("solution file has neither a status nor an objective line")
        status = OPTIMAL
    if status == OPTIMAL and objective is None:
        raise AdapterError("optimal status without an objective line")
    return Solution(status, values, objective, objective if status == OPTIMAL else None)


@dataclass
class ExternalSolver:
    command: tuple[str, ...] = HIGHS_COMMAND
    timeout: float | None = None
    env: dict | None = field(default=None)

    def available(self) -> bool:
        exe = self.command[0]
        if exe == sys.executable and "equipshare.milpcore.highs_adapter" in self.command:
            try:
                import highspy  # noqa: F401
            except ImportError:
                return False
            return True
        return shutil.which(exe) is not None or Path(exe).exists()

    def solve(self, model: MILPModel) -> Solution:
        with tempfile.TemporaryDirectory(prefix="equipshare-") as tmp:
            lp_path = Path(tmp) / "model.lp"
            sol_path = Path(tmp) / "model.sol"
            save_lp(model, lp_path)
            args = [a.replace("{lp}", str(lp_path)).replace("{sol}", str(sol_path)) for a in self.command]
            try:
                proc = subprocess.run(args, capture_output=True, text=True, timeout=self.timeout, env=self.env)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise AdapterError(f"external solver failed to run: {exc}") from exc
            if proc.returncode != 0:
                raise AdapterError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()[:400]}")
            if not sol_path.exists():
                raise AdapterError("external solver produced no solution file")
            sol = parse_solution_text(sol_path.read_text())
        unknown = set(sol.values) - set(model.var_names)
        if unknown:
            raise AdapterError(f"solution names unknown columns, e.g. {sorted(unknown)[:3]}")
        for name in model.var_names:
            sol.values.setdefault(name, Fraction(0))
        return sol


def cross_check(builtin: Solution, external: Solution, tol: float = 1e-6) -> list[str]:
    """Disagreements between two solves of the same model; empty when consistent."""
    problems = []
    if builtin.status != external.status:
        problems.append(f"status mismatch: built-in {builtin.status}, external {external.status}")
        return problems
    if builtin.status == OPTIMAL:
        a, b = float(builtin.objective), float(external.objective)
        if abs(a - b) > tol * max(1.0, abs(a)):
            problems.append(f"objective mismatch: built-in {a}, external {b}")
    return problems


def solve_with_fallback(
    model: MILPModel,
    adapter: ExternalSolver | None,
    limits: SolveLimits | None = None,
    tol: ToleranceConfig | None = None,
    verify: bool = False,
) -> tuple[Solution, list[str]]:
    """Solve with the adapter when present, else the built-in solver.

    With ``verify`` both run and any disagreement is returned as a cross-check
    failure in the notices (never silently accepted).
    """
    notices: list[str] = []
    if adapter is None or not adapter.available():
        notices.append("external solver not available; using the built-in solver")
        return bnb.solve(model, limits, tol), notices
    ext = adapter.solve(model)
    if verify:
        own = bnb.solve(model, limits, tol)
        for problem in cross_check(own, ext):
            notices.append(f"cross-check failure: {problem}")
    return ext, notices


def values_by_index(model: MILPModel, sol: Solution) -> list:
    return [sol.values.get(name, 0) for name in model.var_names]


def is_integral(v, tol=1e-6) -> bool:
    return abs(v - math.floor(v + Fraction(1, 2))) <= tol
