"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""

import json
import resource
import subprocess
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import pytest

from equipshare.evaluation import evaluate_plan
from equipshare.formulation import solve_instance
from equipshare.instance import (
    ScenarioGenConfig,
    generate_scenarios,
    read_population_csv,
    split_extra_stock_by_population,
    write_demand_csv,
)
from equipshare.milpcore import OPTIMAL, SolveLimits, ToleranceConfig
from equipshare.network import HOSPITAL, Node, make_complete_graph
from equipshare.objectives import ALL_OBJECTIVES, ModelOptions, Objective

import scaled
from instances import random_instance, two_node_fixture
from oracle import oracle_optima

ORACLE_SEEDS = range(50)
EXACT = ToleranceConfig("rational")
FLOAT_TOL = Fraction(1, 10**6)
HERE = Path(__file__).parent


@dataclass
class OracleCase:
    seed: int
    scenarios: int
    mismatches: list = field(default_factory=list)
    h_mismatches: int = 0
    objective_gaps: list = field(default_factory=list)
    alphas: list = field(default_factory=list)  # optimal regret values (alpha column)


def check_optimal(res, tol):
    """H columns against recomputed max(0, v) and solver objective against the exact criterion."""
    cm = res.compiled
    rep = evaluate_plan(cm.instance, res.plan, cm.options, res.baselines_by_family())
    names = cm.model.var_names
    bad = sum(
        1 for key, c in cm.index.H.items() if abs(Fraction(res.solution.values[names[c]]) - rep.H[key]) > tol
    )
    gap = abs(Fraction(res.objective) - rep.objectives[cm.objective.label])
    return rep, bad, gap


@pytest.fixture(scope="module")
def oracle_cases():
    start = time.perf_counter()
    cases = []
    for seed in ORACLE_SEEDS:
        inst = random_instance(seed)
        expected = oracle_optima(inst)
        case = OracleCase(seed, len(inst.scenarios.names))
        for obj in ALL_OBJECTIVES:
            if obj.label not in expected:
                continue
            res = solve_instance(inst, obj, limits=SolveLimits(120), tol=EXACT)
            want = expected[obj.label]
            if want is None:
                if res.plan is not None:
                    case.mismatches.append((obj.label, res.status, res.objective, None))
                continue
            if res.status != OPTIMAL or res.objective != want:
                case.mismatches.append((obj.label, res.status, res.objective, want))
                continue
            rep, bad, gap = check_optimal(res, Fraction(0))
            case.h_mismatches += bad
            case.objective_gaps.append(gap)
            if rep.objectives[obj.label] != want:
                case.mismatches.append((obj.label, "evaluated", rep.objectives[obj.label], want))
            if obj.regret:
                alpha = Fraction(res.solution.values[res.compiled.model.var_names[res.compiled.index.alpha]])
                case.alphas.append(alpha)
        cases.append(case)
    return cases, time.perf_counter() - start


@pytest.fixture(scope="module")
def scaled_runs():
    return scaled.run_all()


def test_criterion_1_oracle_equivalence(oracle_cases, record_criterion):
    cases, seconds = oracle_cases
    bad = [(c.seed, m) for c in cases for m in c.mismatches]
    passed = not bad and seconds < 300
    record_criterion(1, passed, f"{len(cases)} instances x 8 criteria, {len(bad)} mismatches, {seconds:.0f}s with enumeration")
    assert passed, bad[:5]


def test_criterion_2_fixture_regression(record_criterion):
    inst = two_node_fixture()
    with_r = solve_instance(inst, Objective("phi4"), tol=EXACT).objective
    without = solve_instance(inst, Objective("phi4"), ModelOptions(no_redistribution=True), tol=EXACT).objective
    passed = with_r == 1 and without == 3
    record_criterion(2, passed, f"phi4 with redistribution {with_r} (stated 1), without {without} (stated 3)")
    assert with_r == 1 and without == 3


def test_criterion_3_heuristic_feasibility(scaled_runs, record_criterion):
    failures = [
        (r.index, f.family, f.heuristic_error or f"{f.heuristic_violations} violations")
        for r in scaled_runs
        for f in r.runs
        if f.heuristic_error or f.heuristic_violations
    ]
    plans = sum(len(r.runs) for r in scaled_runs)
    record_criterion(3, not failures, f"{plans} glued plans on {len(scaled_runs)} instances, {len(failures)} infeasible")
    assert not failures, failures[:5]


def test_criterion_4_heuristic_bound(scaled_runs, record_criterion):
    compared, below, k1_bad, k1_checked = 0, [], [], 0
    for r in scaled_runs:
        for f in r.runs:
            if f.exact_status != OPTIMAL or f.heuristic_value is None:
                continue
            compared += 1
            if f.heuristic_value < f.exact_value:
                below.append((r.index, f.family, f.heuristic_value, f.exact_value))
            if f.k1_value is not None:
                k1_checked += 1
                if f.k1_value != f.exact_value:
                    k1_bad.append((r.index, f.family, f.k1_value, f.exact_value))
    passed = compared > 0 and not below and not k1_bad
    record_criterion(4, passed, f"{compared} comparisons, {len(below)} below exact; K=1 equal on {k1_checked - len(k1_bad)}/{k1_checked}")
    assert passed, (below[:5], k1_bad[:5])


def test_criterion_5_redistribution_dominance(scaled_runs, record_criterion):
    worse, strict, skipped = [], 0, 0
    for r in scaled_runs:
        for f in r.runs:
            if f.exact_status != OPTIMAL or f.without_status not in (OPTIMAL, "infeasible"):
                skipped += 1
                continue
            without = f.without_value  # None: no feasible plan without redistribution (+inf)
            if without is not None and f.exact_value > without:
                worse.append((r.index, f.family, f.exact_value, without))
        phi4 = next(f for f in r.runs if f.family == "phi4")
        if phi4.exact_status == OPTIMAL and (phi4.without_value is None or phi4.exact_value < phi4.without_value):
            strict += 1
    share = strict / len(scaled_runs)
    passed = not worse and share >= 0.3
    record_criterion(5, passed, f"{len(worse)} reversals, strict phi4 improvement on {strict}/{len(scaled_runs)} instances, {skipped} unproven pairs skipped")
    assert passed, worse[:5]


def test_criterion_6_regret_sanity(oracle_cases, record_criterion):
    cases, _ = oracle_cases
    negative = [(c.seed, a) for c in cases for a in c.alphas if a < 0]
    nonzero_single = [(c.seed, a) for c in cases if c.scenarios == 1 for a in c.alphas if a != 0]
    single = sum(1 for c in cases if c.scenarios == 1)
    inst = two_node_fixture()
    fixture_alpha = solve_instance(inst, Objective("phi4", True), tol=EXACT).objective
    passed = not negative and not nonzero_single and single > 0 and fixture_alpha == 0
    alphas = sum(len(c.alphas) for c in cases)
    record_criterion(6, passed, f"{alphas} regret optima, {len(negative)} negative, {len(nonzero_single)} nonzero on {single} one-scenario instances")
    assert passed


def test_criterion_7_h_exactness(oracle_cases, scaled_runs, record_criterion):
    cases, _ = oracle_cases
    rational_h = sum(c.h_mismatches for c in cases)
    rational_gap = max((g for c in cases for g in c.objective_gaps), default=Fraction(0))
    float_h = sum(f.h_mismatches for r in scaled_runs for f in r.runs)
    float_gap = max((g for r in scaled_runs for f in r.runs for g in f.objective_gaps), default=Fraction(0))
    fixture = solve_instance(two_node_fixture(), Objective("phi4"), tol=EXACT)
    _rep, fixture_h, fixture_gap = check_optimal(fixture, Fraction(0))
    solves = sum(len(c.objective_gaps) for c in cases) + sum(len(f.objective_gaps) for r in scaled_runs for f in r.runs) + 1
    passed = rational_h == fixture_h == 0 and rational_gap == fixture_gap == 0 and float_h == 0 and float_gap <= FLOAT_TOL
    record_criterion(
        7, passed,
        f"{solves} optimal solves; H mismatches rational {rational_h + fixture_h}, float {float_h}; "
        f"max objective gap rational {rational_gap + fixture_gap}, float {float(float_gap):.2e}",
    )
    assert passed


def test_criterion_8_scenario_generator(tmp_path, record_criterion):
    nodes = [Node(i, f"u{i}", HOSPITAL, "AB"[i % 2], 1) for i in range(1, 7)]
    dist = [[0 if a == b else 1 + (a + b) % 3 for b in range(6)] for a in range(6)]
    net = make_complete_graph(nodes, dist)
    real = {(i, t): (3 * i + 7 * t) % 12 for i in range(1, 7) for t in range(1, 11)}
    problems = []
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    write_demand_csv(first, generate_scenarios(real, net, ScenarioGenConfig(seed=5)))
    write_demand_csv(second, generate_scenarios(real, net, ScenarioGenConfig(seed=5)))
    if first.read_bytes() != second.read_bytes():
        problems.append("regeneration differs")
    flat = generate_scenarios(real, net, ScenarioGenConfig(seed=5, bound=0))
    if any(flat.demand[(i, t, w)] != v for (i, t), v in real.items() for w in flat.names):
        problems.append("bound 0 scenarios differ")
    for seed in range(30):
        sc = generate_scenarios(real, net, ScenarioGenConfig(seed=seed))
        if any(sc.demand[(i, t, "Pessimistic")] < v for (i, t), v in real.items() if v >= 2):
            problems.append(f"pessimistic below real (seed {seed})")
    share = split_extra_stock_by_population(2400, read_population_csv())
    if (share["Madrid"], share["Andalucia"]) != (340, 429):
        problems.append(f"population split {share['Madrid']}/{share['Andalucia']}")
    record_criterion(8, not problems, "; ".join(problems) or f"deterministic, bound 0 flat, pessimistic >= real, Madrid {share['Madrid']} / Andalucia {share['Andalucia']}")
    assert not problems


def lp_structure(path):
    """Count rows and bound lines of an LP file section by section."""
    section, rows, bounds, header = None, 0, 0, {}
    sections = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("\\ rows "):
                tag, n = line[len("\\ rows "):].split(":")
                header[tag] = int(n)
                continue
            stripped = line.rstrip("\n")
            if stripped in ("Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End"):
                section = stripped
                sections.append(section)
                continue
            if section == "Subject To" and stripped.startswith(" ") and not stripped.startswith("   "):
                rows += 1
            elif section == "Bounds":
                bounds += 1
    return sections, rows, bounds, header


def test_criterion_9_scale_build(tmp_path, record_criterion):
    before = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, str(HERE / "madrid_build.py"), str(tmp_path)], capture_output=True, text=True, timeout=900
    )
    seconds = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr[-2000:]
    peak_gb = max(before, resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss) / 1024**2
    stats = json.loads(proc.stdout.strip().splitlines()[-1])
    sections, rows, bounds, header = lp_structure(tmp_path / "model.lp")
    sidecar = json.loads((tmp_path / "model.index.json").read_text())
    problems = []
    if stats["arcs"] != 2550 or stats["columns"]["x"] != 2550 * 49 or len(sidecar["x"]) != 2550 * 49:
        problems.append(f"x columns {stats['columns']['x']}")
    if sections[:2] != ["Minimize", "Subject To"] or sections[-1] != "End" or "Bounds" not in sections:
        problems.append(f"sections {sections}")
    if rows != stats["constraints"] or sum(header.values()) != rows:
        problems.append(f"row count {rows} vs {stats['constraints']}")
    if bounds != stats["variables"]:
        problems.append(f"bound lines {bounds} vs {stats['variables']} columns")
    try:
        import highspy
    except ImportError:
        highspy = None
    if highspy is not None:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(str(tmp_path / "model.lp"))
        lp = h.getLp()
        if (lp.num_col_, lp.num_row_) != (stats["variables"], stats["constraints"]):
            problems.append(f"external reader sees {lp.num_col_} columns, {lp.num_row_} rows")
    if seconds >= 300:
        problems.append(f"{seconds:.0f}s")
    if peak_gb >= 4:
        problems.append(f"{peak_gb:.1f} GB")
    detail = f"{stats['variables']} columns, {rows} rows, x = {stats['columns']['x']}, {seconds:.0f}s, {peak_gb:.2f} GB peak"
    record_criterion(9, not problems, "; ".join(problems) or detail)
    assert not problems
