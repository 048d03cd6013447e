"""Stochastic multiperiod reallocation of scarce medical equipment between units."""

from .evaluation import EvaluationReport, emit_figure_tables, evaluate_plan, solve_baseline_no_redistribution
from .formulation import CompiledModel, SolveResult, compile_model, compile_regret, export_lp, solve_instance
from .heuristic import HorizonSplit, make_even_split, rolling_horizon_solve
from .instance import (
    CapacityProfile,
    ExtraStockSchedule,
    Instance,
    ScenarioGenConfig,
    ScenarioSet,
    estimate_daily_demand_from_cumulative,
    generate_scenarios,
    load_manifest,
    read_population_csv,
    split_extra_stock_by_population,
    validate_instance,
)
from .network import DistributionNetwork, Node, build_reachability, make_complete_graph, make_lc_graph
from .objectives import ALL_OBJECTIVES, ModelOptions, Objective
from .plan import Plan

__all__ = [
    "ALL_OBJECTIVES", "CapacityProfile", "CompiledModel", "DistributionNetwork", "EvaluationReport",
    "ExtraStockSchedule", "HorizonSplit", "Instance", "ModelOptions", "Node", "Objective", "Plan",
    "ScenarioGenConfig", "ScenarioSet", "SolveResult", "build_reachability", "compile_model", "compile_regret",
    "emit_figure_tables", "estimate_daily_demand_from_cumulative", "evaluate_plan", "export_lp",
    "generate_scenarios", "load_manifest", "make_complete_graph", "make_even_split", "make_lc_graph",
    "read_population_csv", "rolling_horizon_solve", "solve_baseline_no_redistribution", "solve_instance",
    "split_extra_stock_by_population", "validate_instance",
]
