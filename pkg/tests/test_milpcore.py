import itertools
import random
import sys
from fractions import Fraction

import pytest

from equipshare.milpcore import (
    BINARY,
    GE,
    INFEASIBLE,
    INTEGER,
    LE,
    OPTIMAL,
    UNBOUNDED,
    AdapterError,
    ExternalSolver,
    MILPModel,
    ModelError,
    Solution,
    ToleranceConfig,
    cross_check,
    parse_solution_text,
    read_lp,
    solve,
    solve_with_fallback,
    write_lp,
)
from equipshare.milpcore.lpformat import equivalent

EXACT = ToleranceConfig("rational")


def lattice_optimum(model, box):
    """Minimum over every integer point of ``box`` (one range per column) that satisfies the rows."""
    best = None
    for point in itertools.product(*box):
        if model.violations(list(point)):
            continue
        v = model.objective_value(list(point))
        if best is None or v < best:
            best = v
    return best


def test_single_integer_column():
    m = MILPModel()
    x = m.add_var("x", 0, 5, INTEGER)
    m.set_objective([(x, -1)])
    sol = solve(m)
    assert sol.status == OPTIMAL and sol.objective == -5


def test_two_variable_lattice_example():
    m = MILPModel()
    x = m.add_var("x", 0, 5, INTEGER)
    y = m.add_var("y", 0, 5, INTEGER)
    m.add_constraint([(x, 2), (y, 3)], LE, 12)
    m.set_objective([(x, -1), (y, -1)])
    expected = lattice_optimum(m, [range(6), range(6)])
    assert expected == -5
    for tol in (ToleranceConfig(), EXACT):
        sol = solve(m, tol=tol)
        assert sol.objective == expected
        assert 2 * sol["x"] + 3 * sol["y"] <= 12


def knapsack(seed, items=8):
    rng = random.Random(seed)
    m = MILPModel("knapsack")
    w = [rng.randint(1, 20) for _ in range(items)]
    v = [rng.randint(1, 30) for _ in range(items)]
    cols = [m.add_var(f"z{i}", 0, 1, BINARY) for i in range(items)]
    m.add_constraint(list(zip(cols, w)), LE, sum(w) // 2)
    m.set_objective([(c, -vi) for c, vi in zip(cols, v)])
    return m, w, v


@pytest.mark.parametrize("mode", ["float", "rational"])
def test_knapsack_matches_exhaustive(mode):
    m, w, v = knapsack(7)
    best = min(
        -sum(vi for vi, z in zip(v, pick) if z)
        for pick in itertools.product((0, 1), repeat=8)
        if sum(wi for wi, z in zip(w, pick) if z) <= sum(w) // 2
    )
    assert solve(m, tol=ToleranceConfig(mode)).objective == best


@pytest.mark.parametrize("seed", range(15))
def test_random_small_programs_match_lattice(seed):
    rng = random.Random(seed)
    m = MILPModel()
    n = rng.randint(2, 4)
    cols = [m.add_var(f"v{i}", 0, 3, INTEGER) for i in range(n)]
    for _ in range(rng.randint(1, 3)):
        terms = [(c, rng.randint(-3, 4)) for c in cols]
        m.add_constraint(terms, rng.choice([LE, GE]), rng.randint(-2, 6))
    m.set_objective([(c, Fraction(rng.randint(-5, 5), rng.randint(1, 3))) for c in cols])
    expected = lattice_optimum(m, [range(4)] * n)
    sol = solve(m, tol=EXACT)
    if expected is None:
        assert sol.status == INFEASIBLE
    else:
        assert sol.status == OPTIMAL and sol.objective == expected


def test_infeasible_and_unbounded():
    m = MILPModel()
    x = m.add_var("x", 0, 2, INTEGER)
    m.add_constraint([(x, 2)], GE, 5)
    assert solve(m).status == INFEASIBLE
    m = MILPModel()
    x = m.add_var("x", 0, kind=INTEGER)
    m.set_objective([(x, -1)])
    assert solve(m).status == UNBOUNDED


def test_fractional_coefficients_solve_exactly():
    m = MILPModel()
    x = m.add_var("x", 0, 10, INTEGER)
    y = m.add_var("y", 0, 10)
    m.add_constraint([(x, Fraction(1, 3)), (y, 1)], GE, Fraction(7, 3))
    m.set_objective([(x, 1), (y, 4)])
    sol = solve(m, tol=EXACT)
    assert sol.objective == 7 and sol["x"] == 7


def test_starting_incumbent_is_used():
    m, _w, _v = knapsack(3)
    sol = solve(m, incumbent={name: 0 for name in m.var_names})
    assert sol.status == OPTIMAL and sol.objective <= 0


def test_bad_coefficients_rejected():
    m = MILPModel()
    x = m.add_var("x")
    with pytest.raises(ModelError):
        m.add_constraint([(x, float("nan"))], LE, 1)
    with pytest.raises(ModelError):
        m.add_var("x")


# --- LP files -----------------------------------------------------------------------

def test_empty_model_file():
    text = write_lp(MILPModel("empty"))
    assert "Minimize\n obj: 0" in text
    assert "Subject To" in text and text.rstrip().endswith("End")


def test_lp_round_trip_preserves_model():
    m, _w, _v = knapsack(5)
    y = m.add_var("slack", -2, 7)
    m.add_constraint([(y, Fraction(1, 2)), (0, 1)], GE, Fraction(-1, 3), name="mix")
    again = read_lp(write_lp(m))
    assert equivalent(m, again) == []
    assert solve(again, tol=EXACT).objective == solve(m, tol=EXACT).objective


def test_lp_writer_is_deterministic():
    m, _w, _v = knapsack(9)
    assert write_lp(m) == write_lp(m)


# --- external solver contract -------------------------------------------------------

def test_solution_text_parsing():
    sol = parse_solution_text("status optimal\nobjective 3\nx 1.5\ny 2\n")
    assert sol.objective == 3 and sol.values == {"x": Fraction(3, 2), "y": 2}
    with pytest.raises(AdapterError):
        parse_solution_text("status optimal\n")
    with pytest.raises(AdapterError):
        parse_solution_text("x one\n")
    with pytest.raises(AdapterError):
        parse_solution_text("status weird\n")


def test_missing_adapter_falls_back_with_notice():
    m = MILPModel()
    x = m.add_var("x", 3, 10, INTEGER)
    m.set_objective([(x, 1)])
    sol, notices = solve_with_fallback(m, ExternalSolver(("/nonexistent/solver", "{lp}", "{sol}")))
    assert sol.objective == 3
    assert any("not available" in n for n in notices)


def test_cross_check_reports_disagreement():
    good = Solution(OPTIMAL, {}, Fraction(3), Fraction(3))
    assert cross_check(good, Solution(OPTIMAL, {}, Fraction(3), Fraction(3))) == []
    assert cross_check(good, Solution(INFEASIBLE))
    assert cross_check(good, Solution(OPTIMAL, {}, Fraction(4), Fraction(4)))


def test_fake_adapter_through_command_contract(tmp_path):
    script = tmp_path / "fake.py"
    script.write_text(
        "import sys\n"
        "open(sys.argv[2], 'w').write('status infeasible\\n')\n"
    )
    m = MILPModel()
    x = m.add_var("x", 3, 10, INTEGER)
    m.set_objective([(x, 1)])
    adapter = ExternalSolver((sys.executable, str(script), "{lp}", "{sol}"))
    sol, notices = solve_with_fallback(m, adapter, verify=True)
    assert sol.status == INFEASIBLE
    assert any(n.startswith("cross-check failure") for n in notices)


def test_highs_adapter_agrees_on_integer_bound():
    pytest.importorskip("highspy")
    m = MILPModel()
    x = m.add_var("x", 0, kind=INTEGER)
    m.add_constraint([(x, 1)], GE, 3)
    m.set_objective([(x, 1)])
    sol, notices = solve_with_fallback(m, ExternalSolver(), verify=True)
    assert sol.status == OPTIMAL and sol.objective == 3
    assert notices == []
