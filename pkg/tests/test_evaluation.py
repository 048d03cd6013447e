from dataclasses import replace
from fractions import Fraction

import pytest

from equipshare.evaluation import emit_figure_tables, evaluate_plan, solve_baseline_no_redistribution
from equipshare.instance import ExtraStockSchedule, ScenarioSet
from equipshare.milpcore import ToleranceConfig
from equipshare.objectives import ModelOptions, Objective
from equipshare.plan import Plan

from instances import random_instance, two_node_fixture
from oracle import oracle_optima

EXACT = ToleranceConfig("rational")


def ncd_vector(rep):
    return tuple(rep.NCDp[(i, t, "w1")] for i in (1, 2) for t in (1, 2))


def test_empty_plan_zero_demand():
    inst = two_node_fixture()
    zero = {k: 0 for k in inst.scenarios.demand}
    inst = replace(inst, scenarios=ScenarioSet(("w1",), {"w1": 1}, zero))
    rep = evaluate_plan(inst, Plan())
    assert set(rep.NCDp.values()) == {0}
    assert all(rep.H[(i, t, "w1")] == inst.profile.initial_stock[i] for i in (1, 2) for t in (1, 2))
    assert rep.feasible


def test_fixture_two_unit_shipment():
    rep = evaluate_plan(two_node_fixture(), Plan({(1, 2, 1): 2}))
    assert ncd_vector(rep) == (0, 0, 0, 1)
    assert rep.feasible and rep.objectives["phi4"] == 1


def test_fixture_three_unit_shipment_covers_everything():
    rep = evaluate_plan(two_node_fixture(), Plan({(1, 2, 1): 3}))
    assert ncd_vector(rep) == (0, 0, 0, 0)
    assert rep.feasible and rep.objectives["phi4"] == 0


def test_fixture_overshipping_violates_share_limit():
    rep = evaluate_plan(two_node_fixture(), Plan({(1, 2, 1): 4}))
    c1 = [v for v in rep.violations if v.constraint == "C1"]
    assert [(v.i, v.t) for v in c1] == [(1, 1)]
    assert c1[0].slack == -1


def test_plan_with_unknown_pair_rejected():
    with pytest.raises(ValueError):
        evaluate_plan(two_node_fixture(), Plan({(1, 3, 1): 1}))


def test_no_redistribution_option_flags_deliveries():
    rep = evaluate_plan(two_node_fixture(), Plan({(1, 2, 1): 1}), ModelOptions(no_redistribution=True))
    assert not rep.feasible


def test_regret_values_need_baselines():
    inst = two_node_fixture()
    rep = evaluate_plan(inst, Plan({(1, 2, 1): 2}))
    assert rep.objectives["phi4-regret"] is None
    rep = evaluate_plan(inst, Plan({(1, 2, 1): 2}), baselines={"phi4": {"w1": Fraction(0)}})
    assert rep.objectives["phi4-regret"] == 1


def test_baseline_without_stock_source_is_idle():
    inst = two_node_fixture()
    plan, rep, _res = solve_baseline_no_redistribution(inst, Objective("phi4"), tol=EXACT)
    assert plan == Plan()
    assert rep.objectives["phi4"] == evaluate_plan(inst, Plan()).objectives["phi4"] == 3


def test_baseline_with_extra_stock_matches_enumeration():
    inst = replace(two_node_fixture(), extra=ExtraStockSchedule({(1, 1): 2}))
    expected = oracle_optima(inst, no_redistribution=True)["phi4"]
    plan, rep, _res = solve_baseline_no_redistribution(inst, Objective("phi4"), tol=EXACT)
    assert rep.objectives["phi4"] == expected == 1
    assert plan.x == {} and plan.s == {(2, 1, 1): 2}


def test_fixture_figure_series():
    inst = two_node_fixture()
    with_rep = evaluate_plan(inst, Plan({(1, 2, 1): 2}))
    without_rep = evaluate_plan(inst, Plan())
    tables = emit_figure_tables(inst, with_rep, without_rep)
    rows = [line.split(",") for line in tables["series.csv"].splitlines()[1:]]
    assert [(r[2], r[5]) for r in rows] == [("0", "0"), ("1", "3")]
    assert tables == emit_figure_tables(inst, with_rep, without_rep)


def test_zero_demand_series_is_zero():
    inst = two_node_fixture()
    inst = replace(inst, scenarios=ScenarioSet(("w1",), {"w1": 1}, {k: 0 for k in inst.scenarios.demand}))
    tables = emit_figure_tables(inst, evaluate_plan(inst, Plan()))
    assert {line.split(",")[2] for line in tables["series.csv"].splitlines()[1:]} == {"0"}


def test_share_table_sums_to_extra_stock():
    inst = random_instance(44, q_min=3, q_max=3, surplus=True)
    extra = dict(inst.extra.amounts) or {(1, 1): 2}
    inst = replace(inst, extra=ExtraStockSchedule(extra))
    plan, rep, _res = solve_baseline_no_redistribution(inst, Objective("phi4"), tol=EXACT)
    tables = emit_figure_tables(inst, rep, plan=plan)
    got: dict[int, int] = {}
    for line in tables["shares.csv"].splitlines()[1:]:
        k, amount = line.split(",")[0], line.split(",")[4]
        got[int(k)] = got.get(int(k), 0) + int(amount)
    for k in range(1, len(inst.network.regions) + 1):
        assert got[k] == sum(v for (kk, _t), v in extra.items() if kk == k)
