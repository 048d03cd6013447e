"""Problem data and the data-preparation procedures used by the case study."""

from __future__ import annotations

import csv
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .network import (
    HOSPITAL,
    LOGISTIC_CENTER,
    DistributionNetwork,
    ProcessingRule,
    ReachabilityTable,
    build_reachability,
    load_network,
)
from .rational import decimal_str, to_fraction

# Case-study parameter values.
DEFAULT_GAMMA = Fraction(4, 5)
DEFAULT_MAX_SHIPMENT = 20
DEFAULT_MAX_DELIVERIES = 5
LC_DELIVERY_FACTOR = Fraction(2, 5)
DEFAULT_STAY_LENGTH = 21

SCENARIO_NAMES = ("Real", "Pessimistic", "Optimistic")


@dataclass(frozen=True)
class CapacityProfile:
    """Per-unit parameters. ``None`` in Q or a means unbounded."""

    initial_stock: Mapping[int, int]
    max_deliveries: Mapping[int, int | None]
    share_fraction: Mapping[int, Fraction]
    max_shipment: Mapping[int, int]
    storage_cap: Mapping[int, int | None]

    @classmethod
    def uniform(cls, network: DistributionNetwork, s0=0, Q=None, gamma=1, g=1, a=None) -> "CapacityProfile":
        def spread(v, conv):
            if isinstance(v, Mapping):
                return {nd.id: conv(v[nd.id]) for nd in network.nodes}
            return {nd.id: conv(v) for nd in network.nodes}

        opt_int = lambda v: None if v is None else int(v)
        return cls(
            initial_stock=spread(s0, int),
            max_deliveries=spread(Q, opt_int),
            share_fraction=spread(gamma, to_fraction),
            max_shipment=spread(g, int),
            storage_cap=spread(a, opt_int),
        )

    @classmethod
    def case_study(cls, network: DistributionNetwork, graph: str = "complete") -> "CapacityProfile":
        """Stock = ICU beds, a = 2 x ICU beds, gamma = 0.8, g = 20, Q by graph type.

        On the LC graph a hospital may deliver to 0.4 x (degree of its
        logistic center) units, rounded down; centers are unbounded in Q
        and a.
        """
        if graph not in ("complete", "lc"):
            raise ValueError(f"unknown graph type {graph!r}")
        adj = network.adjacency()
        degree = {i: len(arcs) for i, arcs in adj.items()}
        s0, Q, gamma, g, a = {}, {}, {}, {}, {}
        for nd in network.nodes:
            s0[nd.id] = nd.icu_beds
            gamma[nd.id] = DEFAULT_GAMMA
            g[nd.id] = DEFAULT_MAX_SHIPMENT
            center = nd.kind == LOGISTIC_CENTER
            a[nd.id] = None if center else 2 * nd.icu_beds
            if graph == "complete":
                Q[nd.id] = DEFAULT_MAX_DELIVERIES
            elif center:
                Q[nd.id] = None
            else:
                hubs = [arc.to for arc in adj[nd.id] if network.node(arc.to).kind == LOGISTIC_CENTER]
                deg = max((degree[h] for h in hubs), default=degree[nd.id])
                Q[nd.id] = max(1, math.floor(LC_DELIVERY_FACTOR * deg))
        return cls(s0, Q, gamma, g, a)

    def with_initial_stock(self, s0: Mapping[int, int]) -> "CapacityProfile":
        return replace(self, initial_stock=dict(s0))


@dataclass(frozen=True)
class ExtraStockSchedule:
    amounts: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        for key, v in self.amounts.items():
            if v < 0:
                raise ValueError(f"extra stock {key} must be nonnegative")

    def get(self, k: int, t: int) -> int:
        return self.amounts.get((k, t), 0)

    def total(self, k: int) -> int:
        return sum(v for (kk, _t), v in self.amounts.items() if kk == k)


@dataclass(frozen=True)
class ScenarioSet:
    names: tuple[str, ...]
    probabilities: Mapping[str, Fraction]
    demand: Mapping[tuple[int, int, str], int]

    def restrict(self, names: Sequence[str]) -> "ScenarioSet":
        """Sub-family with probabilities renormalised (a single scenario gets p = 1)."""
        names = tuple(names)
        mass = sum(self.probabilities[w] for w in names)
        if mass == 0:
            probs = {w: Fraction(1, len(names)) for w in names}
        else:
            probs = {w: self.probabilities[w] / mass for w in names}
        keep = set(names)
        return ScenarioSet(names, probs, {k: v for k, v in self.demand.items() if k[2] in keep})


@dataclass(frozen=True)
class Instance:
    """One solvable problem.

    ``receipts`` are fixed exogenous arrivals (i, t) -> amount that count as
    stock from period t on; the rolling-horizon heuristic uses them for
    shipments still in flight at a subperiod boundary. Stand-alone instances
    leave it empty.
    """

    network: DistributionNetwork
    reach: ReachabilityTable
    horizon: int
    profile: CapacityProfile
    extra: ExtraStockSchedule
    scenarios: ScenarioSet
    receipts: Mapping[tuple[int, int], int] = field(default_factory=dict)

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    @property
    def node_ids(self) -> list[int]:
        return [nd.id for nd in self.network.nodes]

    def d(self, i: int, t: int, w: str) -> int:
        return self.scenarios.demand[(i, t, w)]

    def with_scenarios(self, names: Sequence[str]) -> "Instance":
        return replace(self, scenarios=self.scenarios.restrict(names))

    def regions_of(self, i: int) -> list[int]:
        return [k for k, reg in enumerate(self.network.regions, start=1) if i in reg]


# --- data preparation -----------------------------------------------------------

@dataclass(frozen=True)
class ScenarioGenConfig:
    seed: int = 0
    bound: Fraction = Fraction(1, 2)
    rounding: str = "nearest"
    zero_fix_support: tuple[int, ...] = (1, 2)
    probabilities: Mapping[str, Fraction] | None = None

    def __post_init__(self):
        b = to_fraction(self.bound)
        if b < 0:
            raise ValueError("province range bound must be >= 0")
        if self.rounding not in ("nearest", "floor", "ceil"):
            raise ValueError(f"unknown rounding {self.rounding!r}")
        object.__setattr__(self, "bound", b)


def _round(value: Fraction, mode: str) -> int:
    if mode == "floor":
        return math.floor(value)
    if mode == "ceil":
        return math.ceil(value)
    return math.floor(value + Fraction(1, 2))


def generate_scenarios(real_demand: Mapping[tuple[int, int], int], network: DistributionNetwork, cfg: ScenarioGenConfig) -> ScenarioSet:
    """Real / Pessimistic / Optimistic demand scenarios.

    Per province j draw r_j^- and r_j^+ in [0, bound]; per unit i of j draw
    its own factors in [0, r_j^-] and [0, r_j^+]. Perturbed cells that end
    up <= 0 take a uniform value from ``zero_fix_support``.
    """
    periods = sorted({t for (_i, t) in real_demand})
    for nd in network.nodes:
        for t in periods:
            if (nd.id, t) not in real_demand:
                raise ValueError(f"real demand missing for node {nd.id}, period {t}")
    rng = random.Random(cfg.seed)
    bound = float(cfg.bound)
    provinces = sorted({nd.province for nd in network.nodes})
    r_minus, r_plus = {}, {}
    for prov in provinces:
        r_minus[prov] = rng.uniform(0.0, bound)
        r_plus[prov] = rng.uniform(0.0, bound)
    unit_minus, unit_plus = {}, {}
    for nd in network.nodes:
        unit_minus[nd.id] = Fraction(rng.uniform(0.0, r_minus[nd.province]))
        unit_plus[nd.id] = Fraction(rng.uniform(0.0, r_plus[nd.province]))

    demand: dict[tuple[int, int, str], int] = {}
    for nd in network.nodes:
        for t in periods:
            demand[(nd.id, t, "Real")] = int(real_demand[(nd.id, t)])
    for name, factor in (("Pessimistic", lambda i: 1 + unit_plus[i]), ("Optimistic", lambda i: 1 - unit_minus[i])):
        for nd in network.nodes:
            f = factor(nd.id)
            for t in periods:
                base = int(real_demand[(nd.id, t)])
                value = _round(f * base, cfg.rounding)
                if f != 1 and value <= 0:
                    value = rng.choice(cfg.zero_fix_support)
                demand[(nd.id, t, name)] = value
    if cfg.probabilities is not None:
        probs = {w: to_fraction(cfg.probabilities[w]) for w in SCENARIO_NAMES}
    else:
        probs = {w: Fraction(1, 3) for w in SCENARIO_NAMES}
    return ScenarioSet(SCENARIO_NAMES, probs, demand)


def estimate_daily_demand_from_cumulative(cumulative: Mapping[tuple[int, int], int], stay_length: int = DEFAULT_STAY_LENGTH) -> dict[tuple[int, int], int]:
    """Active patients per day from cumulative admissions and a fixed stay length."""
    if stay_length < 1:
        raise ValueError("stay length must be positive")
    series: dict[int, dict[int, int]] = defaultdict(dict)
    for (i, t), v in cumulative.items():
        if v < 0:
            raise ValueError(f"negative cumulative value at ({i},{t})")
        series[i][t] = int(v)
    out = {}
    for i, by_t in series.items():
        horizon = max(by_t)
        if sorted(by_t) != list(range(1, horizon + 1)):
            raise ValueError(f"cumulative series for node {i} must cover periods 1..{horizon}")
        prev = 0
        admissions = {}
        for t in range(1, horizon + 1):
            # decreases in the reported series are clamped to zero admissions
            admissions[t] = max(0, by_t[t] - prev)
            prev = by_t[t]
        for t in range(1, horizon + 1):
            out[(i, t)] = sum(admissions[u] for u in range(max(1, t - stay_length + 1), t + 1))
    return out


def split_extra_stock_by_population(total: int, weights: Mapping) -> dict:
    """Largest-remainder apportionment of ``total`` proportionally to ``weights``."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    fw = {k: to_fraction(w) for k, w in weights.items()}
    if any(w < 0 for w in fw.values()):
        raise ValueError("weights must be nonnegative")
    mass = sum(fw.values())
    if mass == 0:
        raise ValueError("weights must not all be zero")
    quota = {k: total * w / mass for k, w in fw.items()}
    share = {k: math.floor(q) for k, q in quota.items()}
    left = total - sum(share.values())
    keys = list(fw)
    order = sorted(keys, key=lambda k: (-(quota[k] - share[k]), keys.index(k)))
    for k in order[:left]:
        share[k] += 1
    return share


def read_population_csv(path=None) -> dict[str, int]:
    """Region populations from a CSV (region, population); defaults to the bundled 2019 table."""
    if path is None:
        text = resources.files("equipshare").joinpath("data/spain_population_2019.csv").read_text()
    else:
        text = Path(path).read_text()
    return {r["region"]: int(r["population"]) for r in csv.DictReader(text.splitlines())}


@dataclass(frozen=True)
class Finding:
    level: str  # "error" or "warning"
    code: str
    message: str


def validate_instance(inst: Instance) -> list[Finding]:
    out: list[Finding] = []
    sc = inst.scenarios
    mass = sum(sc.probabilities.get(w, Fraction(0)) for w in sc.names)
    if mass != 1:
        out.append(Finding("error", "probability-sum", f"probabilities sum to {decimal_str(mass)}"))
    for w in sc.names:
        p = sc.probabilities.get(w)
        if p is None or p < 0:
            out.append(Finding("error", "probability-range", f"scenario {w!r} has invalid probability {p}"))
    missing = [
        (i, t, w)
        for i in inst.node_ids
        for t in inst.periods
        for w in sc.names
        if (i, t, w) not in sc.demand
    ]
    if missing:
        out.append(Finding("error", "missing-demand", f"{len(missing)} demand cells missing, first {missing[0]}"))
    if any(v < 0 for v in sc.demand.values()):
        out.append(Finding("error", "negative-demand", "demands must be nonnegative"))
    prof = inst.profile
    for i in inst.node_ids:
        for label, table in (
            ("initial_stock", prof.initial_stock),
            ("share_fraction", prof.share_fraction),
            ("max_shipment", prof.max_shipment),
            ("max_deliveries", prof.max_deliveries),
            ("storage_cap", prof.storage_cap),
        ):
            if i not in table:
                out.append(Finding("error", "missing-parameter", f"{label} missing for node {i}"))
        gamma = prof.share_fraction.get(i)
        if gamma is not None and not (0 <= gamma <= 1):
            out.append(Finding("error", "gamma-range", f"share fraction of node {i} is {gamma}, outside [0,1]"))
        if prof.initial_stock.get(i, 0) < 0:
            out.append(Finding("error", "negative-stock", f"initial stock of node {i} is negative"))
        if prof.max_shipment.get(i, 1) < 1:
            out.append(Finding("error", "max-shipment", f"max shipment of node {i} must be positive"))
        for label, table in (("max_deliveries", prof.max_deliveries), ("storage_cap", prof.storage_cap)):
            v = table.get(i)
            if v is not None and v < 0:
                out.append(Finding("error", "negative-capacity", f"{label} of node {i} is negative"))
        cap = prof.storage_cap.get(i)
        if cap is not None and prof.initial_stock.get(i, 0) > cap:
            out.append(
                Finding(
                    "warning",
                    "stock-above-storage",
                    f"node {i}: initial stock {prof.initial_stock[i]} exceeds storage cap {cap}; "
                    "the storage constraint may be infeasible in period 1",
                )
            )
    regions = len(inst.network.regions)
    for (k, t), v in inst.extra.amounts.items():
        if not (1 <= k <= regions):
            out.append(Finding("error", "unknown-region", f"extra stock references region {k}"))
        if not (1 <= t <= inst.horizon):
            out.append(Finding("error", "extra-period", f"extra stock at period {t} outside the horizon"))
    for i in inst.network.unregioned_hospitals():
        out.append(Finding("warning", "no-region", f"node {i} belongs to no sharing region"))
    return out


# --- files --------------------------------------------------------------------

def _csv_rows(path, required: tuple[str, ...]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def read_demand_csv(path) -> tuple[dict[tuple[int, int, str], int], tuple[str, ...]]:
    demand, names = {}, []
    for row in _csv_rows(path, ("node_id", "period", "demand")):
        w = row.get("scenario") or "Real"
        if w not in names:
            names.append(w)
        demand[(int(row["node_id"]), int(row["period"]), w)] = int(row["demand"])
    return demand, tuple(names)


def write_demand_csv(path, scenarios: ScenarioSet) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["node_id", "period", "scenario", "demand"])
        for w in scenarios.names:
            for (i, t, ww), v in sorted(scenarios.demand.items(), key=lambda kv: (kv[0][0], kv[0][1])):
                if ww == w:
                    wr.writerow([i, t, w, v])


def read_probability_csv(path) -> dict[str, Fraction]:
    return {row["scenario"]: to_fraction(row["p"]) for row in _csv_rows(path, ("scenario", "p"))}


def write_probability_csv(path, scenarios: ScenarioSet) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["scenario", "p"])
        for w in scenarios.names:
            wr.writerow([w, str(scenarios.probabilities[w])])


def read_cumulative_csv(path) -> dict[tuple[int, int], int]:
    rows = _csv_rows(path, ("node_id", "period", "cumulative"))
    return {(int(r["node_id"]), int(r["period"])): int(r["cumulative"]) for r in rows}


def _per_node(spec, network: DistributionNetwork, conv, default):
    if spec is None and default is not None:
        return dict(default)
    if isinstance(spec, Mapping):
        base = dict(default) if default is not None else {}
        base.update({int(k): conv(v) for k, v in spec.items()})
        missing = [nd.id for nd in network.nodes if nd.id not in base]
        if missing:
            raise ValueError(f"profile value missing for nodes {missing}")
        return base
    return {nd.id: conv(spec) for nd in network.nodes}


def _opt_int(v):
    if v is None or (isinstance(v, str) and v.lower() in ("inf", "infinity", "unbounded")):
        return None
    return int(v)


def profile_from_dict(doc: Mapping, network: DistributionNetwork) -> CapacityProfile:
    base = CapacityProfile.case_study(network, doc["defaults"]) if doc.get("defaults") else None
    pick = lambda attr: getattr(base, attr) if base is not None else None
    return CapacityProfile(
        initial_stock=_per_node(doc.get("initial_stock"), network, int, pick("initial_stock")),
        max_deliveries=_per_node(doc.get("max_deliveries", "inf") if base is None else doc.get("max_deliveries"), network, _opt_int, pick("max_deliveries")),
        share_fraction=_per_node(doc.get("share_fraction"), network, to_fraction, pick("share_fraction")),
        max_shipment=_per_node(doc.get("max_shipment"), network, int, pick("max_shipment")),
        storage_cap=_per_node(doc.get("storage_cap", "inf") if base is None else doc.get("storage_cap"), network, _opt_int, pick("storage_cap")),
    )


def processing_from_dict(doc: Mapping | None) -> ProcessingRule:
    if not doc:
        return ProcessingRule.flat(0)
    return ProcessingRule(doc.get("kind", "flat"), to_fraction(doc.get("days", 0)))


GRAPH_KINDS = ("complete", "lc")


def load_manifest(path: str | Path, scenario_seed: int | None = None, graph: str | None = None) -> Instance:
    """Assemble an Instance from a JSON manifest; relative paths resolve against it.

    ``network`` is a file name, an inline network, or a mapping from graph
    kind ("complete", "lc") to either; ``graph`` picks the entry (default:
    the first one) and also selects the case-study profile defaults.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent
    net_ref = doc["network"]
    if isinstance(net_ref, Mapping) and set(net_ref) <= set(GRAPH_KINDS):
        choice = graph or next(iter(net_ref))
        if choice not in net_ref:
            raise ValueError(f"manifest has no {choice!r} network (has {sorted(net_ref)})")
        net_ref = net_ref[choice]
        graph = choice
    elif graph is not None and graph not in GRAPH_KINDS:
        raise ValueError(f"unknown graph kind {graph!r}")
    if isinstance(net_ref, str):
        network = load_network(base / net_ref)
    else:
        from .network import network_from_dict

        network = network_from_dict(net_ref)
    if "regions" in doc or "partition" in doc:
        network = network.with_groups(
            [frozenset(r) for r in doc["regions"]] if "regions" in doc else None,
            [frozenset(m) for m in doc["partition"]] if "partition" in doc else None,
        )
    reach = build_reachability(network, processing_from_dict(doc.get("processing")))

    if "demand" in doc:
        demand, names = read_demand_csv(base / doc["demand"])
    elif "cumulative_icu" in doc:
        daily = estimate_daily_demand_from_cumulative(
            read_cumulative_csv(base / doc["cumulative_icu"]), int(doc.get("stay_length", DEFAULT_STAY_LENGTH))
        )
        demand, names = {(i, t, "Real"): v for (i, t), v in daily.items()}, ("Real",)
    else:
        raise ValueError("manifest needs 'demand' or 'cumulative_icu'")
    horizon = int(doc.get("horizon", max(t for (_i, t, _w) in demand)))

    gen = doc.get("scenario_generation")
    if gen is not None and len(names) == 1:
        real = {(i, t): v for (i, t, w), v in demand.items() if w == names[0]}
        cfg = ScenarioGenConfig(
            seed=int(gen.get("seed", 0) if scenario_seed is None else scenario_seed),
            bound=to_fraction(gen.get("bound", "0.5")),
            rounding=gen.get("rounding", "nearest"),
        )
        scenarios = generate_scenarios(real, network, cfg)
    else:
        if "probabilities" in doc:
            probs = read_probability_csv(base / doc["probabilities"])
        else:
            probs = {w: Fraction(1, len(names)) for w in names}
        scenarios = ScenarioSet(names, probs, demand)
    if any(t > horizon for (_i, t, _w) in scenarios.demand):
        scenarios = ScenarioSet(
            scenarios.names,
            scenarios.probabilities,
            {k: v for k, v in scenarios.demand.items() if k[1] <= horizon},
        )

    prof_doc = dict(doc.get("profile", {}))
    if graph is not None and prof_doc.get("defaults"):
        prof_doc["defaults"] = graph
    profile = profile_from_dict(prof_doc, network)
    extra = ExtraStockSchedule(
        {(int(e["region"]), int(e["period"])): int(e["amount"]) for e in doc.get("extra_stock", [])}
    )
    return Instance(network, reach, horizon, profile, extra, scenarios)
