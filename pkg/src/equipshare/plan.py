"""The decision output shared by every solve path."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping


@dataclass(frozen=True)
class Plan:
    """Deliveries x[(i, j, t)] and shares s[(i, k, t)]; absent keys are zero."""

    x: Mapping[tuple[int, int, int], int] = field(default_factory=dict)
    s: Mapping[tuple[int, int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        for label, table in (("x", self.x), ("s", self.s)):
            for key, v in table.items():
                if v != int(v) or v < 0:
                    raise ValueError(f"{label}{key} = {v} is not a nonnegative integer")
        object.__setattr__(self, "x", {k: int(v) for k, v in self.x.items() if v})
        object.__setattr__(self, "s", {k: int(v) for k, v in self.s.items() if v})

    def y(self, i: int, j: int, t: int) -> int:
        return 1 if self.x.get((i, j, t), 0) >= 1 else 0

    def shipped(self, t: int) -> int:
        return sum(v for (_i, _j, tt), v in self.x.items() if tt == t)

    def restricted(self, periods: Iterable[int]) -> "Plan":
        keep = set(periods)
        return Plan(
            {k: v for k, v in self.x.items() if k[2] in keep},
            {k: v for k, v in self.s.items() if k[2] in keep},
        )

    def shifted(self, offset: int) -> "Plan":
        """Renumber periods t -> t + offset."""
        return Plan(
            {(i, j, t + offset): v for (i, j, t), v in self.x.items()},
            {(i, k, t + offset): v for (i, k, t), v in self.s.items()},
        )

    def merged(self, other: "Plan") -> "Plan":
        x = dict(self.x)
        s = dict(self.s)
        for k, v in other.x.items():
            x[k] = x.get(k, 0) + v
        for k, v in other.s.items():
            s[k] = s.get(k, 0) + v
        return Plan(x, s)

    def rows(self):
        for (i, j, t), v in sorted(self.x.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
            yield ("x", i, j, t, v)
        for (i, k, t), v in sorted(self.s.items(), key=lambda kv: (kv[0][2], kv[0][1], kv[0][0])):
            yield ("s", i, k, t, v)


def write_plan_csv(path, plan: Plan) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["kind", "i", "j_or_k", "t", "amount"])
        for row in plan.rows():
            wr.writerow(row)


def read_plan_csv(path) -> Plan:
    x, s = {}, {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["i"]), int(row["j_or_k"]), int(row["t"]))
            target = x if row["kind"] == "x" else s if row["kind"] == "s" else None
            if target is None:
                raise ValueError(f"unknown plan row kind {row['kind']!r}")
            target[key] = target.get(key, 0) + int(row["amount"])
    return Plan(x, s)


def plan_from_tables(x: Mapping, s: Mapping) -> Plan:
    return Plan(dict(x), dict(s))
