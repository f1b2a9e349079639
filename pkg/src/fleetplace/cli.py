"""Command line interface: ``fleetplace <verb> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .data import (
    DEFAULT_ROTARY_ONLY_FRACTION,
    ParseError,
    PoolTooSmall,
    ValidationError,
    assignment_to_dict,
    default_fleet,
    generate_instance,
    instance_hash,
    load_instance,
    save_instance,
    save_json,
    synthesize_pool,
)
from .exact import (
    BudgetExceeded,
    Infeasible,
    InfeasibleReconstruction,
    NonBinaryValue,
    UnknownVariable,
    brute_force_optimal,
    export_milp,
    import_solution,
)
from .model import Instance, InstanceError, build_distance_table, check_feasible, objective_km
from .parallel import WORKERS_ENV, ParallelConfig, parallel_local_search, parallel_tabu_search
from .rank import NoCompatibleVehicle, random_start, rank_bases
from .search import SearchConfig, search


def _load(directory: str) -> Instance:
    d = Path(directory)
    return load_instance(d / "bases.csv", d / "missions.csv", d / "fleet.csv")


def _workers(args) -> ParallelConfig:
    if args.workers is not None:
        return ParallelConfig(workers=args.workers)
    return ParallelConfig.from_env()


def _report(a, inst, t, out: str | None) -> None:
    print(f"objective_km {objective_km(a, inst, t):.6f}")
    if out:
        save_json(assignment_to_dict(a), out)


def _generate(pool_seed: int, missions: int, seed: int, args) -> Instance:
    pool = synthesize_pool(pool_seed, n_clusters=args.clusters)
    return generate_instance(pool, missions, args.rotary_only_fraction, seed=seed,
                             fleet=default_fleet(args.rotary, args.fixed),
                             n_aerodromes=args.aerodromes, n_helipads=args.helipads)


def cmd_generate(args) -> int:
    inst = _generate(args.pool_seed, args.missions, args.seed, args)
    save_instance(inst, args.out)
    print(f"wrote {args.out} ({len(inst.bases)} bases, {len(inst.fleet)} vehicles, "
          f"{len(inst.missions)} missions, hash {instance_hash(inst)[:12]})")
    return 0


def cmd_rank(args) -> int:
    inst = _load(args.instance)
    t = build_distance_table(inst)
    _report(rank_bases(inst, t).assignment, inst, t, args.out)
    return 0


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    t = build_distance_table(inst)
    if args.start == "rank":
        start = rank_bases(inst, t)
    else:
        start = random_start(inst, np.random.default_rng(args.seed))
    cfg = SearchConfig(seed=args.seed, mode=args.mode, tabu_tenure=args.tenure,
                       tabu_key=args.tabu_key, debug=args.debug)
    pcfg = _workers(args)
    if pcfg.workers == 1:
        a = search(start, inst, t, cfg)
    elif args.mode == "tabu":
        a = parallel_tabu_search(start, inst, t, cfg, pcfg)
    else:
        a = parallel_local_search(start, inst, t, cfg, pcfg)
    _report(a, inst, t, args.out)
    return 0


def cmd_exact(args) -> int:
    inst = _load(args.instance)
    t = build_distance_table(inst)
    res = brute_force_optimal(inst, t, limit=args.limit, workers=_workers(args).workers)
    print(f"nodes {res.nodes_enumerated}")
    _report(res.assignment, inst, t, args.out)
    return 0


def cmd_export_milp(args) -> int:
    inst = _load(args.instance)
    text = export_milp(inst, build_distance_table(inst), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_import_solution(args) -> int:
    inst = _load(args.instance)
    t = build_distance_table(inst)
    a = import_solution(Path(args.solution).read_text(encoding="utf-8"), inst)
    violations = check_feasible(a, inst)
    if violations:
        print(f"error: infeasible solution: {violations[0]}", file=sys.stderr)
        return 2
    _report(a, inst, t, args.out)
    return 0


def cmd_bench(args) -> int:
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    pcfg = _workers(args)
    instances: list[Instance] = [_load(d) for d in args.instance or []]
    solutions = args.solution or []
    if len(solutions) > len(instances):
        print("error: more --solution files than --instance directories", file=sys.stderr)
        return 2
    for n in args.missions or []:
        inst = _generate(args.pool_seed, n, args.seed, args)
        save_instance(inst, run_dir / f"instance_{n}")
        instances.append(inst)
    if not instances:
        print("error: give --instance or --missions", file=sys.stderr)
        return 2
    reports = []
    for k, inst in enumerate(instances):
        t = build_distance_table(inst)
        exact_km = None
        if k < len(solutions):
            a = import_solution(Path(solutions[k]).read_text(), inst)
            exact_km = objective_km(a, inst, t)
        elif args.exact:
            try:
                exact_km = brute_force_optimal(inst, t, limit=args.limit, workers=pcfg.workers).objective_km
            except BudgetExceeded:
                logging.getLogger(__name__).warning(
                    "%d missions: exact reference over budget, gap left empty", len(inst.missions))
        r = bench.run_experiment(inst, args.algorithms, args.attempts, args.seed, pcfg, exact_km,
                                 args.tenure, args.tabu_key, args.random_starts, t)
        reports.append(r)
        for name in r.algorithms():
            s = r.summary(name)
            if s is not None:
                print(f"{r.missions:4d} {name:15s} U {s.upper:.3f} L {s.lower:.3f} A {s.average:.3f} "
                      f"t {s.mean_seconds:.3f}s")
    bench.emit_report(reports, "csv", run_dir / "report.csv")
    bench.emit_report(reports, "json", run_dir / "report.json")
    bench.write_manifest(run_dir, reports, {k: v for k, v in vars(args).items() if k != "func"})
    print(f"wrote {run_dir}")
    return 0


def cmd_plot_data(args) -> int:
    reports = [r for path in args.reports for r in bench.load_reports(path)]
    for p in bench.emit_plot_data(reports, args.out):
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fleetplace", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def instance_arg(p):
        p.add_argument("instance", help="directory with bases.csv, missions.csv, fleet.csv")

    def workers_arg(p):
        p.add_argument("--workers", type=int, default=None, help=f"worker threads (default ${WORKERS_ENV} or 1)")

    def search_args(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tenure", type=int, default=None, help="tabu tenure (default 2 x missions)")
        p.add_argument("--tabu-key", choices=("base", "vehicle"), default="base")
        workers_arg(p)

    def generation_args(p):
        p.add_argument("--pool-seed", type=int, default=0)
        p.add_argument("--rotary-only-fraction", type=float, default=DEFAULT_ROTARY_ONLY_FRACTION)
        p.add_argument("--aerodromes", type=int, default=None, help="sample this many (default: whole pool)")
        p.add_argument("--helipads", type=int, default=None)
        p.add_argument("--clusters", type=int, default=5)
        p.add_argument("--rotary", type=int, default=8, help="rotary-wing vehicles in the fleet")
        p.add_argument("--fixed", type=int, default=4, help="fixed-wing vehicles in the fleet")

    p = sub.add_parser("generate", help="synthesize an instance")
    p.add_argument("--missions", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    generation_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("rank", help="base ranking start")
    instance_arg(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("solve", help="local or Tabu search")
    instance_arg(p)
    p.add_argument("--mode", choices=("local", "tabu"), default="tabu")
    p.add_argument("--start", choices=("rank", "random"), default="rank")
    p.add_argument("--debug", action="store_true", help="check feasibility and deltas after every move")
    p.add_argument("--out")
    search_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="brute-force optimum (small instances)")
    instance_arg(p)
    p.add_argument("--limit", type=int, default=5_000_000)
    p.add_argument("--out")
    workers_arg(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("export-milp", help="write the MILP in LP or MPS format")
    instance_arg(p)
    p.add_argument("--format", choices=("lp", "mps"), default="lp")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_milp)

    p = sub.add_parser("import-solution", help="read an external solver's solution file")
    instance_arg(p)
    p.add_argument("solution")
    p.add_argument("--out")
    p.set_defaults(func=cmd_import_solution)

    p = sub.add_parser("bench", help="repeated attempts with U/L/A report")
    p.add_argument("--instance", action="append", help="instance directory (repeatable)")
    p.add_argument("--missions", type=int, nargs="+", help="generate instances of these sizes")
    p.add_argument("--algorithms", nargs="+", choices=bench.ALGORITHMS, default=["local", "tabu"])
    p.add_argument("--attempts", type=int, default=10)
    p.add_argument("--exact", action="store_true", help="brute-force reference where the budget allows")
    p.add_argument("--limit", type=int, default=5_000_000)
    p.add_argument("--solution", action="append",
                   help="external MILP solution used as the exact reference, paired with --instance in order")
    p.add_argument("--random-starts", type=int, default=100)
    p.add_argument("--run-dir", required=True)
    search_args(p)
    generation_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot-data", help="gap, timing and start tables from bench reports")
    p.add_argument("reports", nargs="+", help="report.json files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_data)
    return parser


USER_ERRORS = (
    BudgetExceeded, Infeasible, InfeasibleReconstruction, InstanceError, NoCompatibleVehicle,
    NonBinaryValue, ParseError, PoolTooSmall, UnknownVariable, ValidationError, FileNotFoundError,
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
