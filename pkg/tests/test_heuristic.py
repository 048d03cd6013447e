import json

import pytest

from equipshare.evaluation import evaluate_plan
from equipshare.formulation import solve_instance
from equipshare.heuristic import (
    HorizonSplit,
    boundary_state,
    make_even_split,
    rolling_horizon_solve,
    split_from_lengths,
)
from equipshare.milpcore import ToleranceConfig
from equipshare.objectives import FAMILIES, Objective
from equipshare.plan import Plan

from instances import random_instance, two_node_fixture

EXACT = ToleranceConfig("rational")


def test_even_split_two_parts():
    split = make_even_split(4, 2)
    assert split.breakpoints == (1, 3, 5)
    assert split.subperiod(1) == [1, 2] and split.subperiod(2) == [3, 4]
    assert split.extended(1) == [1, 2, 3] and split.extended(2) == [3, 4]


def test_long_horizon_twelve_parts():
    assert make_even_split(49, 12).lengths() == [5] + [4] * 11


def test_singleton_subperiods():
    assert make_even_split(5, 5).lengths() == [1] * 5


def test_split_errors():
    with pytest.raises(ValueError):
        make_even_split(3, 4)
    with pytest.raises(ValueError):
        HorizonSplit((1, 3, 3))
    assert split_from_lengths([2, 1]).breakpoints == (1, 3, 4)


def test_one_part_matches_exact_solve():
    inst = random_instance(12, q_max=3)
    for family in FAMILIES:
        if family == "phi3" and not inst.network.partition:
            continue
        exact = solve_instance(inst, Objective(family), tol=EXACT)
        plan, diag = rolling_horizon_solve(inst, Objective(family), make_even_split(inst.horizon, 1), tol=EXACT)
        assert evaluate_plan(inst, plan).objectives[family] == exact.objective
        assert len(diag.subproblems) == 1


def test_fixture_split_is_feasible_and_no_better_than_exact():
    inst = two_node_fixture()
    plan, diag = rolling_horizon_solve(inst, Objective("phi4"), make_even_split(2, 2), tol=EXACT)
    rep = evaluate_plan(inst, plan)
    assert rep.feasible
    assert rep.objectives["phi4"] >= solve_instance(inst, Objective("phi4"), tol=EXACT).objective
    doc = json.loads(diag.to_json())
    assert doc["breakpoints"] == [1, 2, 3]
    assert [s["k"] for s in doc["subproblems"]] == [1, 2]
    assert doc["subproblems"][0]["carry_over"] == {"1": 4, "2": 0}


def test_boundary_state_counts_arrivals_and_in_flight():
    inst = two_node_fixture()
    carry, later = boundary_state(inst, Plan({(1, 2, 1): 3}), 2)
    assert carry == {1: 1, 2: 3} and later == {}


def test_boundary_state_keeps_late_arrivals_as_receipts():
    inst = random_instance(1027, n_max=3, q_min=4, q_max=6, scenarios=3, surplus=True)
    pair = max(inst.reach.pairs, key=lambda p: inst.reach.lag(*p))
    i, j = pair
    lag = inst.reach.lag(i, j)
    assert lag >= 2
    carry, later = boundary_state(inst, Plan({(i, j, 1): 1}), 2)
    assert later == {(j, 1 + lag): 1}
    assert carry[i] == inst.profile.initial_stock[i] - 1
    assert carry[j] == inst.profile.initial_stock[j]


@pytest.mark.parametrize("family", FAMILIES)
def test_long_lead_times_keep_subproblems_feasible(family):
    # a shipment dispatched near a boundary with a two-period lead time used to
    # land after the subproblem horizon and overflow a storage limit later on
    inst = random_instance(1027, n_max=3, q_min=4, q_max=6, scenarios=3, surplus=True)
    plan, _diag = rolling_horizon_solve(inst, Objective(family), make_even_split(inst.horizon, 2))
    assert evaluate_plan(inst, plan).violations == []


@pytest.mark.parametrize("seed", range(5))
def test_glued_plans_are_feasible(seed):
    inst = random_instance(300 + seed, n_max=3, q_min=4, q_max=5, scenarios=2, surplus=True, roomy_storage=True)
    for K in (2, 3):
        plan, diag = rolling_horizon_solve(inst, Objective("phi4"), make_even_split(inst.horizon, K))
        assert evaluate_plan(inst, plan).violations == []
        assert diag.all_optimal
