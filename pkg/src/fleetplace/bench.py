"""Repeated-attempt experiments, U/L/A summaries and report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable

import jsonschema
import numpy as np

from .data import dumps, instance_hash
from .model import DistanceTable, Instance, build_distance_table, check_feasible, objective_km
from .parallel import ParallelConfig, parallel_local_search, parallel_tabu_search
from .rank import random_start, rank_bases
from .search import SearchConfig, local_search, tabu_search

log = logging.getLogger(__name__)

ALGORITHMS = ("rank", "local", "tabu", "parallel_local", "parallel_tabu")
CSV_COLUMNS = ("missions", "algorithm", "U", "L", "A", "exact", "gap_pct", "mean_seconds")


@dataclass
class Attempt:
    algorithm: str
    seed: int
    objective_km: float | None
    seconds: float | None
    error: str | None = None


@dataclass(frozen=True)
class Summary:
    algorithm: str
    upper: float
    lower: float
    average: float
    mean_seconds: float
    gap_pct: float | None  # of the average, None without a reference
    succeeded: int
    failed: int


@dataclass
class RunReport:
    missions: int
    instance_hash: str
    attempts: list[Attempt]
    exact_km: float | None = None
    ranking_km: float | None = None
    random_mean_km: float | None = None
    config: dict[str, Any] = field(default_factory=dict)

    def algorithms(self) -> list[str]:
        seen = []
        for a in self.attempts:
            if a.algorithm not in seen:
                seen.append(a.algorithm)
        return seen

    def summary(self, algorithm: str) -> Summary | None:
        runs = [a for a in self.attempts if a.algorithm == algorithm]
        ok = [a for a in runs if a.error is None]
        if not ok:
            return None
        values = [a.objective_km for a in ok]
        avg = statistics.fmean(values)
        return Summary(
            algorithm=algorithm,
            upper=max(values),
            lower=min(values),
            average=avg,
            mean_seconds=statistics.fmean(a.seconds for a in ok),
            gap_pct=gap_pct(avg, self.exact_km),
            succeeded=len(ok),
            failed=len(runs) - len(ok),
        )


def gap_pct(value: float, exact: float | None) -> float | None:
    if exact is None:
        return None
    if exact == 0.0:
        return 0.0 if value == 0.0 else math.inf
    return 100.0 * (value - exact) / exact


def _solve(algorithm: str, inst: Instance, t: DistanceTable, cfg: SearchConfig, pcfg: ParallelConfig):
    start = rank_bases(inst, t)
    t0 = time.perf_counter()
    if algorithm == "rank":
        a = start.assignment
    elif algorithm == "local":
        a = local_search(start, inst, t, cfg)
    elif algorithm == "tabu":
        a = tabu_search(start, inst, t, cfg)
    elif algorithm == "parallel_local":
        a = parallel_local_search(start, inst, t, cfg, pcfg)
    elif algorithm == "parallel_tabu":
        a = parallel_tabu_search(start, inst, t, cfg, pcfg)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return a, time.perf_counter() - t0


def random_start_mean(inst: Instance, t: DistanceTable, n: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    return statistics.fmean(objective_km(random_start(inst, rng), inst, t) for _ in range(n))


def run_experiment(
    inst: Instance,
    algorithms: Iterable[str] = ("local", "tabu"),
    attempts: int = 10,
    seed: int = 0,
    pcfg: ParallelConfig | None = None,
    exact_km: float | None = None,
    tabu_tenure: int | None = None,
    tabu_key: str = "base",
    n_random: int = 0,
    t: DistanceTable | None = None,
) -> RunReport:
    """Run each algorithm ``attempts`` times with seeds seed, seed+1, ...

    Every result is feasibility-checked and its objective recomputed from
    the assignment. A failing attempt is recorded and the rest still run.
    """
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    algorithms = list(algorithms)
    for name in algorithms:
        if name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}")
    pcfg = pcfg or ParallelConfig()
    t = t if t is not None else build_distance_table(inst)
    records: list[Attempt] = []
    for name in algorithms:
        mode = "tabu" if name.endswith("tabu") else "local"
        for k in range(attempts):
            cfg = SearchConfig(seed=seed + k, mode=mode, tabu_tenure=tabu_tenure, tabu_key=tabu_key)
            try:
                a, seconds = _solve(name, inst, t, cfg, pcfg)
                violations = check_feasible(a, inst)
                if violations:
                    raise RuntimeError(f"infeasible result: {violations[0]}")
                records.append(Attempt(name, seed + k, objective_km(a, inst, t), seconds))
            except Exception as exc:  # noqa: BLE001 - one bad attempt must not sink the run
                log.warning("%s attempt %d failed: %s", name, k, exc)
                records.append(Attempt(name, seed + k, None, None, f"{type(exc).__name__}: {exc}"))
    report = RunReport(
        missions=len(inst.missions),
        instance_hash=instance_hash(inst),
        attempts=records,
        exact_km=exact_km,
        config={"attempts": attempts, "seed": seed, "workers": pcfg.workers,
                "tabu_tenure": tabu_tenure, "tabu_key": tabu_key},
    )
    if n_random:
        report.ranking_km = objective_km(rank_bases(inst, t).assignment, inst, t)
        report.random_mean_km = random_start_mean(inst, t, n_random, seed)
    return report


# --- reports ---------------------------------------------------------------

_NUM = {"type": "number"}
_OPT_NUM = {"type": ["number", "null"]}

REPORT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["missions", "instance_hash", "exact_km", "ranking_km", "random_mean_km",
                 "config", "attempts", "summary"],
    "properties": {
        "missions": {"type": "integer", "minimum": 0},
        "instance_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "exact_km": _OPT_NUM,
        "ranking_km": _OPT_NUM,
        "random_mean_km": _OPT_NUM,
        "config": {"type": "object"},
        "attempts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["algorithm", "seed", "objective_km", "seconds", "error"],
                "properties": {
                    "algorithm": {"enum": list(ALGORITHMS)},
                    "seed": {"type": "integer"},
                    "objective_km": _OPT_NUM,
                    "seconds": _OPT_NUM,
                    "error": {"type": ["string", "null"]},
                },
                "additionalProperties": False,
            },
        },
        "summary": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["algorithm", "upper", "lower", "average", "mean_seconds", "gap_pct",
                             "succeeded", "failed"],
                "properties": {
                    "algorithm": {"enum": list(ALGORITHMS)},
                    "upper": _NUM, "lower": _NUM, "average": _NUM, "mean_seconds": _NUM,
                    "gap_pct": _OPT_NUM,
                    "succeeded": {"type": "integer"}, "failed": {"type": "integer"},
                },
            },
        },
    },
    "additionalProperties": False,
}


def report_to_dict(r: RunReport) -> dict[str, Any]:
    summaries = [s for s in (r.summary(name) for name in r.algorithms()) if s is not None]
    return {
        "missions": r.missions,
        "instance_hash": r.instance_hash,
        "exact_km": r.exact_km,
        "ranking_km": r.ranking_km,
        "random_mean_km": r.random_mean_km,
        "config": r.config,
        "attempts": [asdict(a) for a in r.attempts],
        "summary": [asdict(s) for s in summaries],
    }


def report_from_dict(d: dict[str, Any]) -> RunReport:
    jsonschema.validate(d, REPORT_SCHEMA)
    return RunReport(
        missions=d["missions"],
        instance_hash=d["instance_hash"],
        attempts=[Attempt(**a) for a in d["attempts"]],
        exact_km=d["exact_km"],
        ranking_km=d["ranking_km"],
        random_mean_km=d["random_mean_km"],
        config=d["config"],
    )


def _cell(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def _csv(header: Iterable[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_csv(reports: Iterable[RunReport]) -> str:
    rows = []
    for r in reports:
        for name in r.algorithms():
            s = r.summary(name)
            if s is None:
                rows.append([r.missions, name, "", "", "", _cell(r.exact_km), "", ""])
                continue
            rows.append([r.missions, name, _cell(s.upper), _cell(s.lower), _cell(s.average),
                         _cell(r.exact_km), _cell(s.gap_pct), _cell(s.mean_seconds)])
    return _csv(CSV_COLUMNS, rows)


def render_json(reports: Iterable[RunReport]) -> str:
    docs = [report_to_dict(r) for r in reports]
    for d in docs:
        jsonschema.validate(d, REPORT_SCHEMA)
    return json.dumps(docs, indent=2, sort_keys=True) + "\n"


def emit_report(reports: RunReport | list[RunReport], fmt: str, path) -> Path:
    """Write one or more reports as CSV (summary table) or JSON (full record)."""
    if isinstance(reports, RunReport):
        reports = [reports]
    if fmt == "csv":
        text = render_csv(reports)
    elif fmt == "json":
        text = render_json(reports)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    p = Path(path)
    p.write_text(text, encoding="utf-8")
    return p


def load_reports(path) -> list[RunReport]:
    return [report_from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


# --- plot tables ------------------------------------------------------------

GAP_COLUMNS = ("missions", "algorithm", "exact", "U", "L", "A", "gap_pct")
TIMING_COLUMNS = ("missions", "algorithm", "mean_seconds", "y_scale")
START_COLUMNS = ("missions", "ranking", "random_mean", "exact", "ranking_gap_pct", "random_gap_pct")


def plot_tables(reports: list[RunReport]) -> dict[str, str]:
    """Gap, timing and start-quality tables, one row per (mission count, algorithm)."""
    counts = sorted({r.missions for r in reports})
    if len(counts) < 2:
        raise ValueError("plot data needs at least two mission counts")
    ordered = sorted(reports, key=lambda r: r.missions)
    gap_rows, time_rows, start_rows = [], [], []
    for r in ordered:
        for name in r.algorithms():
            s = r.summary(name)
            if s is None:
                continue
            gap_rows.append([r.missions, name, _cell(r.exact_km), _cell(s.upper), _cell(s.lower),
                             _cell(s.average), _cell(s.gap_pct)])
            time_rows.append([r.missions, name, _cell(s.mean_seconds), "log"])
        if r.ranking_km is not None:
            start_rows.append([r.missions, _cell(r.ranking_km), _cell(r.random_mean_km), _cell(r.exact_km),
                               _cell(gap_pct(r.ranking_km, r.exact_km)),
                               _cell(gap_pct(r.random_mean_km, r.exact_km)
                                     if r.random_mean_km is not None else None)])
    return {
        "gap.csv": _csv(GAP_COLUMNS, gap_rows),
        "timing.csv": _csv(TIMING_COLUMNS, time_rows),
        "starts.csv": _csv(START_COLUMNS, start_rows),
    }


def emit_plot_data(reports: list[RunReport], directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for name, text in plot_tables(reports).items():
        p = d / name
        p.write_text(text, encoding="utf-8")
        out.append(p)
    return out


# --- run directory -------------------------------------------------------------

def _version(dist: str) -> str | None:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return None


def write_manifest(directory, reports: list[RunReport], config: dict[str, Any]) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "instances": [{"missions": r.missions, "hash": r.instance_hash} for r in reports],
        "config": config,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "artifact": _version("artifact"),
        },
    }
    p = d / "manifest.json"
    p.write_text(dumps(manifest), encoding="utf-8")
    return p
