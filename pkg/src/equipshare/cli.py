"""Command-line front end: solve, generate-scenarios, export-lp, evaluate.

Exit codes: 0 proven optimal or feasible heuristic plan, 2 incumbent only
(a limit was hit), 1 error or no plan, 64 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .evaluation import emit_figure_tables, evaluate_plan, write_figure_tables
from .formulation import BaselineError, CompileError, compile_model, compile_regret, export_lp, make_solver, solve_instance
from .heuristic import HeuristicError, make_even_split, rolling_horizon_solve
from .instance import (
    GRAPH_KINDS,
    ScenarioGenConfig,
    generate_scenarios,
    load_manifest,
    read_demand_csv,
    validate_instance,
    write_demand_csv,
    write_probability_csv,
)
from .milpcore import OPTIMAL, ExternalSolver, SolveLimits, ToleranceConfig
from .network import load_network
from .objectives import AT_MOST, EQUALITY, PHI3, ModelOptions, Objective
from .plan import read_plan_csv, write_plan_csv
from .rational import decimal_str

log = logging.getLogger("equipshare")

EXIT_OK, EXIT_ERROR, EXIT_INCUMBENT, EXIT_USAGE = 0, 1, 2, 64
OBJECTIVE_CHOICES = [f"phi{n}{r}" for r in ("", "-regret") for n in range(1, 5)]
DEFAULT_TIME_LIMIT = 3600.0
CASE_STUDY_SPLITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; keep 2 for "incumbent only"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    manifest: Path
    objective: Objective
    graph: str | None = None
    solver: str = "builtin"
    splits: int = 0
    seed: int | None = None
    time_limit: float = DEFAULT_TIME_LIMIT
    node_limit: int = 1_000_000
    mode: str = "float"
    c4_mode: str = EQUALITY
    c5_exempt: frozenset = field(default_factory=frozenset)
    no_redistribution: bool = False
    compare: bool = False
    outdir: Path = Path("out")

    def __post_init__(self):
        if self.splits < 0:
            raise UsageError("--splits must be >= 0")
        if self.solver not in ("builtin", "lp-export", "adapter"):
            raise UsageError(f"unknown solver {self.solver!r}")

    @property
    def options(self) -> ModelOptions:
        return ModelOptions(self.c4_mode, self.c5_exempt, self.no_redistribution)

    @property
    def limits(self) -> SolveLimits:
        return SolveLimits(self.time_limit, self.node_limit)

    @property
    def tol(self) -> ToleranceConfig:
        return ToleranceConfig(self.mode)


def _node_list(text: str) -> frozenset:
    if not text:
        return frozenset()
    try:
        return frozenset(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids, got {text!r}") from None


def _value(v) -> str:
    if v is None:
        return "n/a"
    return decimal_str(v) if isinstance(v, Fraction) else repr(v)


def _load(cfg: RunConfig):
    inst = load_manifest(cfg.manifest, scenario_seed=cfg.seed, graph=cfg.graph)
    findings = validate_instance(inst)
    fatal = [f.message for f in findings if f.level == "error"]
    if fatal:
        raise UsageError("; ".join(fatal))
    for f in findings:
        if f.level == "warning":
            log.warning("%s", f.message)
    if cfg.objective.family == PHI3 and not inst.network.partition:
        raise UsageError("phi3 needs a fairness partition in the manifest or network file")
    unknown = sorted(cfg.c5_exempt - set(inst.node_ids))
    if unknown:
        raise UsageError(f"--c5-exempt names unknown nodes {unknown}")
    if cfg.splits > inst.horizon:
        raise UsageError(f"--splits {cfg.splits} exceeds the horizon of {inst.horizon} periods")
    return inst


def _external(cfg: RunConfig):
    if cfg.solver != "adapter":
        return None
    ext = ExternalSolver(timeout=cfg.time_limit)
    if not ext.available():
        log.warning("external solver not available; using the built-in solver")
        return None
    return ext


def _solve(cfg: RunConfig, inst):
    """(plan, status, objective, baselines, info, heuristic diagnostics or None)."""
    ext = _external(cfg)
    if cfg.splits == 0:
        res = solve_instance(inst, cfg.objective, cfg.options, cfg.limits, cfg.tol, ext)
        sol = res.solution
        info = {
            "status": res.status,
            "objective": _value(res.objective),
            "bound": _value(sol.bound),
            "nodes": sol.nodes,
            "iterations": sol.iterations,
            "seconds": round(sol.wall_time, 6),
            "notes": list(sol.notes),
        }
        if res.compiled.baseline_stats:
            info["baselines"] = {w: _value(v) for w, v in res.baselines.items()}
        return res.plan, res.status, res.objective, res.baselines_by_family(), info, None
    split = make_even_split(inst.horizon, cfg.splits)
    plan, diag = rolling_horizon_solve(inst, cfg.objective, split, cfg.options, cfg.limits, cfg.tol, ext)
    status = "heuristic" if cfg.splits > 1 else diag.subproblems[0].status
    info = {"status": status, "splits": list(split.breakpoints), "all_subproblems_optimal": diag.all_optimal}
    # the glued plan's value is recomputed below by the evaluator
    return plan, status, None, {}, info, diag


def cmd_solve(cfg: RunConfig) -> int:
    inst = _load(cfg)
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.solver == "lp-export":
        return _export(cfg, inst, out)

    start = time.perf_counter()
    plan, status, objective, baselines, info, diag = _solve(cfg, inst)
    if diag is not None:
        (out / "heuristic.json").write_text(diag.to_json())
    if plan is None:
        info["seconds_total"] = round(time.perf_counter() - start, 6)
        (out / "report.json").write_text(json.dumps({"solve": info}, indent=2) + "\n")
        print(f"status {status}: no plan found", file=sys.stderr)
        return EXIT_ERROR

    rep = evaluate_plan(inst, plan, cfg.options, baselines)
    # report the exact value of the plan; the solver's float objective carries round-off
    exact = rep.objectives.get(cfg.objective.label)
    if exact is not None:
        objective = exact
    without = None
    if cfg.compare and not cfg.no_redistribution:
        from .evaluation import solve_baseline_no_redistribution

        _p, without, base_res = solve_baseline_no_redistribution(
            inst, cfg.objective, cfg.options, limits=cfg.limits, tol=cfg.tol, external=_external(cfg)
        )
        info["without_redistribution"] = {
            "status": base_res.status,
            "objective": _value(None if without is None else without.objectives.get(cfg.objective.label)),
        }
    info["seconds_total"] = round(time.perf_counter() - start, 6)

    write_plan_csv(out / "plan.csv", plan)
    doc = {"objective": cfg.objective.label, "value": _value(objective), "solve": info}
    doc["evaluation"] = json.loads(rep.to_json())
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    write_figure_tables(out, emit_figure_tables(inst, rep, without, plan))

    print(f"status {status}")
    print(f"objective {_value(objective)}")
    if not rep.feasible:
        print(f"plan violates {len(rep.violations)} constraints", file=sys.stderr)
        return EXIT_ERROR
    if status in (OPTIMAL, "heuristic"):
        return EXIT_OK
    return EXIT_INCUMBENT


def _export(cfg: RunConfig, inst, out: Path) -> int:
    if cfg.objective.regret:
        solver = make_solver(cfg.limits, cfg.tol, _external(cfg))
        cm = compile_regret(inst, cfg.objective.family, cfg.options, solver, mode=cfg.mode)
    else:
        cm = compile_model(inst, cfg.objective, cfg.options, mode=cfg.mode)
    stats = export_lp(cm, out / "model.lp", out / "model.index.json")
    print(f"wrote {out / 'model.lp'} ({stats['variables']} columns, {stats['constraints']} rows)")
    return EXIT_OK


def cmd_export_lp(cfg: RunConfig) -> int:
    inst = _load(cfg)
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return _export(cfg, inst, out)


def cmd_generate_scenarios(args) -> int:
    network = load_network(args.network)
    demand, names = read_demand_csv(args.real_demand)
    if len(names) != 1:
        raise UsageError(f"real-demand file must hold one scenario, found {list(names)}")
    real = {(i, t): v for (i, t, _w), v in demand.items()}
    cfg = ScenarioGenConfig(seed=args.seed, bound=Fraction(args.bound), rounding=args.rounding)
    scen = generate_scenarios(real, network, cfg)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_demand_csv(out / "demand.csv", scen)
    write_probability_csv(out / "probabilities.csv", scen)
    print(f"wrote {out / 'demand.csv'} and {out / 'probabilities.csv'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst = load_manifest(args.manifest, scenario_seed=args.seed, graph=args.graph)
    options = ModelOptions(args.c4_mode, args.c5_exempt, args.no_redistribution)
    plan = read_plan_csv(args.plan)
    rep = evaluate_plan(inst, plan, options)
    text = rep.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.feasible else EXIT_ERROR


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("manifest", type=Path, help="instance manifest (JSON)")
    p.add_argument("--graph", choices=GRAPH_KINDS, default=None, help="network entry of the manifest to use")
    p.add_argument("--seed", type=int, default=None, help="scenario-generation seed (overrides the manifest)")
    p.add_argument("--c4-mode", choices=(EQUALITY, AT_MOST), default=EQUALITY)
    p.add_argument("--c5-exempt", type=_node_list, default=frozenset(), help="comma-separated node ids")
    p.add_argument("--no-redistribution", action="store_true", help="fix all deliveries to zero")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objective", choices=OBJECTIVE_CHOICES, default="phi4")
    p.add_argument("--solver", choices=("builtin", "lp-export", "adapter"), default="builtin")
    p.add_argument("--mode", choices=("float", "rational"), default="float", help="solver arithmetic")
    p.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT, help="seconds per MILP solve")
    p.add_argument("--node-limit", type=int, default=1_000_000)
    p.add_argument("--outdir", type=Path, default=Path("out"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="equipshare", description="Stochastic reallocation of medical equipment between units")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ps = sub.add_parser("solve", help="solve exactly or with the rolling-horizon heuristic")
    _model_flags(ps)
    _run_flags(ps)
    ps.add_argument("--splits", type=int, default=0, help=f"heuristic subperiods K (0 = exact; case study: {CASE_STUDY_SPLITS})")
    ps.add_argument("--compare", action="store_true", help="also solve without redistribution for the figure tables")

    pe = sub.add_parser("export-lp", help="write the MILP as an LP file plus an index sidecar")
    _model_flags(pe)
    _run_flags(pe)

    pg = sub.add_parser("generate-scenarios", help="Real / Pessimistic / Optimistic demand scenarios")
    pg.add_argument("network", type=Path)
    pg.add_argument("real_demand", type=Path, help="demand CSV with a single scenario")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--bound", default="0.5", help="province range bound")
    pg.add_argument("--rounding", choices=("nearest", "floor", "ceil"), default="nearest")
    pg.add_argument("--outdir", type=Path, default=Path("scenarios"))

    pv = sub.add_parser("evaluate", help="check a plan CSV and report every criterion")
    _model_flags(pv)
    pv.add_argument("plan", type=Path)
    pv.add_argument("--out", type=Path, default=None)
    return parser


def _config(args) -> RunConfig:
    return RunConfig(
        manifest=args.manifest,
        objective=Objective.parse(args.objective),
        graph=args.graph,
        solver=args.solver,
        splits=getattr(args, "splits", 0),
        seed=args.seed,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        mode=args.mode,
        c4_mode=args.c4_mode,
        c5_exempt=args.c5_exempt,
        no_redistribution=args.no_redistribution,
        compare=getattr(args, "compare", False),
        outdir=args.outdir,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(_config(args))
        if args.command == "export-lp":
            return cmd_export_lp(_config(args))
        if args.command == "generate-scenarios":
            return cmd_generate_scenarios(args)
        return cmd_evaluate(args)
    except UsageError as exc:
        print(f"equipshare: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CompileError, BaselineError, HeuristicError, ValueError, OSError) as exc:
        print(f"equipshare: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
