"""Distribution graph, reachability and the two case-study topologies."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .rational import to_fraction

HOSPITAL = "hospital"
LOGISTIC_CENTER = "logistic-center"
NODE_KINDS = (HOSPITAL, LOGISTIC_CENTER)


@dataclass(frozen=True)
class Node:
    id: int
    label: str = ""
    kind: str = HOSPITAL
    province: str = ""
    icu_beds: int = 0
    population_weight: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"node {self.id}: unknown kind {self.kind!r}")
        if self.icu_beds < 0:
            raise ValueError(f"node {self.id}: icu_beds must be >= 0")
        object.__setattr__(self, "population_weight", to_fraction(self.population_weight))


@dataclass(frozen=True)
class Arc:
    frm: int
    to: int
    weight: Fraction

    def __post_init__(self):
        w = to_fraction(self.weight)
        if self.frm == self.to:
            raise ValueError(f"self-loop arc on node {self.frm}")
        if w < 0:
            raise ValueError(f"arc ({self.frm},{self.to}) has negative weight {w}")
        object.__setattr__(self, "weight", w)


@dataclass(frozen=True)
class DistributionNetwork:
    """Units, directed links, sharing regions and the fairness partition.

    ``regions`` are the (possibly overlapping) groups that receive extra
    stock; ``partition`` holds the disjoint groups used by the per-region
    criterion. Both are tuples of frozensets of node ids.
    """

    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    regions: tuple[frozenset, ...] = ()
    partition: tuple[frozenset, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "regions", tuple(frozenset(r) for r in self.regions))
        object.__setattr__(self, "partition", tuple(frozenset(m) for m in self.partition))
        ids = [nd.id for nd in self.nodes]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("node ids must be contiguous 1..n in order")
        n = len(ids)
        seen = set()
        for a in self.arcs:
            if not (1 <= a.frm <= n and 1 <= a.to <= n):
                raise ValueError(f"arc ({a.frm},{a.to}) references an undeclared node")
            if (a.frm, a.to) in seen:
                raise ValueError(f"duplicate arc ({a.frm},{a.to})")
            seen.add((a.frm, a.to))
        for k, reg in enumerate(self.regions, start=1):
            if not reg:
                raise ValueError(f"region {k} is empty")
            if not reg <= set(ids):
                raise ValueError(f"region {k} references undeclared nodes")
        union: set[int] = set()
        for ell, part in enumerate(self.partition, start=1):
            if not part <= set(ids):
                raise ValueError(f"partition set {ell} references undeclared nodes")
            if union & part:
                raise ValueError("fairness partition sets must be pairwise disjoint")
            union |= part

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node(self, i: int) -> Node:
        return self.nodes[i - 1]

    def unregioned_hospitals(self) -> list[int]:
        covered = set().union(*self.regions) if self.regions else set()
        return [nd.id for nd in self.nodes if nd.kind == HOSPITAL and nd.id not in covered]

    def adjacency(self) -> dict[int, list[Arc]]:
        out: dict[int, list[Arc]] = {nd.id: [] for nd in self.nodes}
        for a in self.arcs:
            out[a.frm].append(a)
        return out

    def with_groups(self, regions=None, partition=None) -> "DistributionNetwork":
        return DistributionNetwork(
            self.nodes,
            self.arcs,
            self.regions if regions is None else regions,
            self.partition if partition is None else partition,
        )


@dataclass(frozen=True)
class ProcessingRule:
    """Fixed handling time added to every shortest path.

    ``flat`` adds ``days`` once per pair; ``per-hub`` adds ``days`` for every
    logistic center strictly inside the chosen path.
    """

    kind: str = "flat"
    days: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("flat", "per-hub"):
            raise ValueError(f"unknown processing rule {self.kind!r}")
        d = to_fraction(self.days)
        if d < 0:
            raise ValueError("processing time must be nonnegative")
        object.__setattr__(self, "days", d)

    @classmethod
    def flat(cls, days=0) -> "ProcessingRule":
        return cls("flat", days)

    @classmethod
    def per_hub(cls, days) -> "ProcessingRule":
        return cls("per-hub", days)

    def surcharge(self, network: DistributionNetwork, path: Sequence[int]) -> Fraction:
        if self.kind == "flat":
            return self.days
        hubs = sum(1 for v in path[1:-1] if network.node(v).kind == LOGISTIC_CENTER)
        return self.days * hubs


@dataclass(frozen=True)
class ReachabilityTable:
    pairs: frozenset
    lengths: Mapping[tuple[int, int], Fraction]
    paths: Mapping[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def out_pairs(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self.pairs if a == i)

    def lag(self, i: int, j: int) -> int:
        """Whole periods between dispatch and the first period the goods count as received."""
        return math.ceil(self.lengths[(i, j)])


def _shortest_from(src: int, adj: Mapping[int, list[Arc]]):
    # Keys (weight, hops, path) are compared lexicographically, which gives the
    # documented tie-breaking; extending a path preserves the order.
    best: dict[int, tuple] = {}
    heap = [(Fraction(0), 0, (src,))]
    while heap:
        w, h, path = heapq.heappop(heap)
        u = path[-1]
        if u in best:
            continue
        best[u] = (w, h, path)
        for a in adj[u]:
            if a.to not in best:
                heapq.heappush(heap, (w + a.weight, h + 1, path + (a.to,)))
    return best


def build_reachability(network: DistributionNetwork, processing: ProcessingRule | None = None) -> ReachabilityTable:
    processing = processing or ProcessingRule.flat(0)
    adj = network.adjacency()
    pairs = set()
    lengths: dict[tuple[int, int], Fraction] = {}
    paths: dict[tuple[int, int], tuple[int, ...]] = {}
    for nd in network.nodes:
        for dst, (w, _h, path) in _shortest_from(nd.id, adj).items():
            if dst == nd.id:
                continue
            pairs.add((nd.id, dst))
            lengths[(nd.id, dst)] = w + processing.surcharge(network, path)
            paths[(nd.id, dst)] = path
    return ReachabilityTable(frozenset(pairs), lengths, paths)


def _check_distance(distance: Sequence[Sequence], n: int) -> list[list[Fraction]]:
    if len(distance) != n or any(len(row) != n for row in distance):
        raise ValueError(f"distance matrix must be {n}x{n}")
    dist = [[to_fraction(v) for v in row] for row in distance]
    for i in range(n):
        if dist[i][i] != 0:
            raise ValueError("distance matrix must have a zero diagonal")
        for j in range(i + 1, n):
            if dist[i][j] != dist[j][i]:
                raise ValueError(f"distance matrix is not symmetric at ({i + 1},{j + 1})")
            if dist[i][j] < 0:
                raise ValueError("distances must be nonnegative")
    return dist


def _normalized_arcs(links: Iterable[tuple[int, int]], dist: list[list[Fraction]]) -> list[Arc]:
    links = sorted(set(links))
    top = max((dist[i - 1][j - 1] for i, j in links), default=Fraction(0))
    arcs = []
    for i, j in links:
        w = dist[i - 1][j - 1] / top if top > 0 else Fraction(0)
        arcs.append(Arc(i, j, w))
        arcs.append(Arc(j, i, w))
    arcs.sort(key=lambda a: (a.frm, a.to))
    return arcs


def make_complete_graph(nodes: Sequence[Node], distance: Sequence[Sequence], regions=(), partition=()) -> DistributionNetwork:
    """Every pair linked both ways; weights are distances divided by the largest one."""
    nodes = list(nodes)
    if len(nodes) < 2:
        raise ValueError("a complete graph needs at least 2 nodes")
    dist = _check_distance(distance, len(nodes))
    links = [(a.id, b.id) for ai, a in enumerate(nodes) for b in nodes[ai + 1:]]
    return DistributionNetwork(nodes, _normalized_arcs(links, dist), regions, partition)


def make_lc_graph(
    hospitals: Sequence[Node],
    provincial_centers: Mapping[str, Node],
    regional_center: Node | None,
    distance: Sequence[Sequence],
    regions=(),
    partition=(),
) -> DistributionNetwork:
    """Star-of-stars topology: hospital <-> provincial center <-> regional center.

    Centers may be hospitals of the list (the Madrid and Andalucía setups use
    designated hospitals) or additional nodes. ``distance`` is indexed by
    node id - 1 over the full node set.
    """
    by_id: dict[int, Node] = {}
    for nd in list(hospitals) + list(provincial_centers.values()) + ([regional_center] if regional_center else []):
        prev = by_id.get(nd.id)
        if prev is not None and prev != nd:
            raise ValueError(f"conflicting definitions for node {nd.id}")
        by_id[nd.id] = nd
    nodes = [by_id[k] for k in sorted(by_id)]
    dist = _check_distance(distance, len(nodes))
    center_ids = {c.id for c in provincial_centers.values()}
    links = []
    for h in hospitals:
        center = provincial_centers.get(h.province)
        if center is None:
            raise ValueError(f"hospital {h.id} has province {h.province!r} without a logistic center")
        if h.id != center.id and h.id not in center_ids:
            links.append((min(h.id, center.id), max(h.id, center.id)))
    if regional_center is not None:
        for c in provincial_centers.values():
            if c.id != regional_center.id:
                links.append((min(c.id, regional_center.id), max(c.id, regional_center.id)))
    return DistributionNetwork(nodes, _normalized_arcs(links, dist), regions, partition)


# --- JSON network files -------------------------------------------------------

def _euclid(a, b) -> Fraction:
    d = math.dist(a, b)
    return Fraction(str(round(d, 6)))


def network_from_dict(doc: Mapping) -> DistributionNetwork:
    nodes = [
        Node(
            id=int(nd["id"]),
            label=str(nd.get("label", "")),
            kind=nd.get("kind", HOSPITAL),
            province=str(nd.get("province", "")),
            icu_beds=int(nd.get("icu_beds", 0)),
            population_weight=to_fraction(nd.get("population_weight", 0)),
        )
        for nd in doc["nodes"]
    ]
    nodes.sort(key=lambda nd: nd.id)
    regions = [frozenset(int(v) for v in r) for r in doc.get("regions", [])]
    partition = [frozenset(int(v) for v in m) for m in doc.get("partition", [])]
    if "arcs" in doc:
        arcs = [Arc(int(a["from"]), int(a["to"]), to_fraction(a["weight"])) for a in doc["arcs"]]
        return DistributionNetwork(nodes, arcs, regions, partition)
    topo = doc.get("topology")
    if not topo:
        raise ValueError("network file needs either 'arcs' or a 'topology' directive")
    if "distance" in topo:
        distance = topo["distance"]
    elif "coordinates" in topo:
        coords = topo["coordinates"]
        distance = [[_euclid(a, b) for b in coords] for a in coords]
    else:
        raise ValueError("topology directive needs 'distance' or 'coordinates'")
    kind = topo.get("kind")
    if kind == "complete":
        return make_complete_graph(nodes, distance, regions, partition)
    if kind == "lc":
        centers = {str(p): nodes[int(i) - 1] for p, i in topo["centers"].items()}
        reg = topo.get("regional_center")
        hospitals = [nd for nd in nodes if nd.kind == HOSPITAL]
        return make_lc_graph(hospitals, centers, nodes[int(reg) - 1] if reg else None, distance, regions, partition)
    raise ValueError(f"unknown topology kind {kind!r}")


def load_network(path: str | Path) -> DistributionNetwork:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def network_to_dict(net: DistributionNetwork) -> dict:
    return {
        "nodes": [
            {
                "id": nd.id,
                "label": nd.label,
                "kind": nd.kind,
                "province": nd.province,
                "icu_beds": nd.icu_beds,
                "population_weight": str(nd.population_weight),
            }
            for nd in net.nodes
        ],
        "arcs": [{"from": a.frm, "to": a.to, "weight": str(a.weight)} for a in net.arcs],
        "regions": [sorted(r) for r in net.regions],
        "partition": [sorted(m) for m in net.partition],
    }
