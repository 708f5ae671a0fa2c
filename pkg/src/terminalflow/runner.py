"""Replication execution and per-replication output files."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats as sps

from .config import RunPlan
from .engine import to_clock
from .flights import Stage
from .flow import Simulation
from .observability import boarding_time_stats, peak_window

TIMESTAMP_COLUMNS = [
    "enter",
    "checkin_join", "checkin_start", "checkin_end",
    "police_join", "police_start", "police_end",
    "hall_enter", "hall_leave",
    "security_join", "security_start", "security_end",
    "gate_join", "gate_start", "gate_end",
    "board", "exit",
]
STATS = ("mean", "median", "p95", "max")


class SimulationFailed(RuntimeError):
    pass


@dataclass
class RunResult:
    replication_index: int
    seed: int
    summary: dict[str, float | None]
    paths: list[str] = field(default_factory=list)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def simulate(plan: RunPlan, replication_index: int, log_events: bool = False,
             collect_density: bool = True) -> Simulation:
    sim = Simulation(plan.scenario, plan.flights, plan.layout, replication_index,
                     log_events=log_events, collect_density=collect_density)
    sim.events_processed = sim.run().events_processed
    return sim


def summarize(sim: Simulation) -> dict[str, float | None]:
    """Flat metric dictionary for one replication."""
    passengers = list(sim.passengers.values())
    bstats = boarding_time_stats(passengers, list(sim.flights))
    out: dict[str, float | None] = {}
    for scope, entry in bstats.items():
        for key in ("generated", "boarded", "missed", *STATS):
            out[f"{scope}.{key}"] = entry[key]
    overall = bstats["overall"]
    out["missed_fraction"] = overall["missed"] / overall["generated"] if overall["generated"] else 0.0
    series = sim.queue_series
    for sid in series.station_ids:
        out[f"time_avg_load.{sid}"] = series.time_average(sid)
        out[f"max_load.{sid}"] = series.max_load(sid)
        out[f"completions.{sid}"] = sim.stations[sid].completions
    peak_t, peak = peak_window(series)
    out["peak_time_s"] = peak_t
    out["peak_load"] = peak
    out["density_total"] = sim.density.total
    out["events_processed"] = sim.events_processed
    return out


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_replication(sim: Simulation, rep_dir: Path) -> list[str]:
    rep_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def rows_passengers():
        for p in sim.passengers.values():
            yield [p.id, p.flight_id, p.nationality.value, p.walk_speed, p.stage.value,
                   p.missed_stage.value if p.missed_stage else None,
                   p.stations.get("checkin"), p.stations.get("security"),
                   *(p.timestamps.get(c) for c in TIMESTAMP_COLUMNS)]

    _write_csv(rep_dir / "passengers.csv",
               ["passenger_id", "flight_id", "nationality", "walk_speed_mps", "final_stage",
                "missed_at_stage", "checkin_station", "security_station",
                *(f"t_{c}" for c in TIMESTAMP_COLUMNS)],
               rows_passengers())
    _write_csv(rep_dir / "queues.csv", ["time_s", "station_id", "load"],
               ((t, sid, load) for t, sid, load, _ in sim.queue_series.rows))
    grid = sim.density
    _write_csv(rep_dir / "density.csv", ["row", "col", "count"],
               ((r, c, int(grid.counts[r, c])) for r in range(grid.height) for c in range(grid.width)))
    (rep_dir / "density.pgm").write_text(grid.to_pgm(), encoding="ascii")

    summary = summarize(sim)
    bstats = boarding_time_stats(list(sim.passengers.values()), list(sim.flights))
    rows = []
    for fid, entry in bstats.items():
        scope = "overall" if fid == "overall" else "flight"
        for key in ("generated", "boarded", "missed"):
            rows.append((scope, fid, key, entry[key]))
        for key in STATS:
            rows.append((scope, fid, f"boarding_time_{key}_s", entry[key]))
    for sid in sim.queue_series.station_ids:
        rows.append(("station", sid, "max_load", summary[f"max_load.{sid}"]))
        rows.append(("station", sid, "time_avg_load", summary[f"time_avg_load.{sid}"]))
        rows.append(("station", sid, "completions", summary[f"completions.{sid}"]))
    rows.append(("run", "all", "missed_fraction", summary["missed_fraction"]))
    rows.append(("run", "all", "peak_time_s", summary["peak_time_s"]))
    rows.append(("run", "all", "peak_clock", to_clock(summary["peak_time_s"])))
    rows.append(("run", "all", "peak_load", summary["peak_load"]))
    rows.append(("run", "all", "density_samples", grid.samples))
    rows.append(("run", "all", "events_processed", summary["events_processed"]))
    _write_csv(rep_dir / "summary.csv", ["scope", "id", "metric", "value"], rows)

    if sim.engine.log is not None:
        _write_csv(rep_dir / "events.csv", ["time_s", "seq", "kind", "payload"],
                   ((e.time, e.seq, e.kind.value,
                     "/".join(map(str, e.payload)) if isinstance(e.payload, tuple) else e.payload)
                    for e in sim.engine.log))
    for name in sorted(os.listdir(rep_dir)):
        written.append(str(rep_dir / name))
    return written


def run_one(plan: RunPlan, replication_index: int, out_dir: Path | None,
            log_events: bool = False) -> tuple[RunResult, Simulation]:
    sim = simulate(plan, replication_index, log_events=log_events)
    paths = write_replication(sim, out_dir / f"rep_{replication_index}") if out_dir else []
    return RunResult(replication_index, plan.scenario.seed, summarize(sim), paths), sim


def _worker(args) -> RunResult:
    plan, k, out_dir, log_events = args
    return run_one(plan, k, out_dir, log_events)[0]


def mean_ci(values: list[float], level: float = 0.95) -> tuple[float, float, float]:
    """Sample mean and two-sided Student-t confidence interval."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, math.nan, math.nan
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    half = float(sps.t.ppf(0.5 + level / 2, n - 1)) * sd / math.sqrt(n)
    return mean, mean - half, mean + half


AGGREGATE_METRICS = ("overall.mean", "overall.median", "overall.p95", "overall.max",
                     "overall.boarded", "overall.missed", "missed_fraction",
                     "peak_time_s", "peak_load")


def aggregate(results: list[RunResult]) -> list[tuple]:
    results = sorted(results, key=lambda r: r.replication_index)
    keys = list(AGGREGATE_METRICS)
    extra = sorted(k for k in results[0].summary
                   if k.startswith(("time_avg_load.", "max_load.")))
    rows = []
    for key in keys + extra:
        values = [float(r.summary[key]) for r in results if r.summary.get(key) is not None]
        mean, lo, hi = mean_ci(values)
        name = "mean_boarding_time_s" if key == "overall.mean" else key
        rows.append((name, len(values), mean, lo, hi))
    return rows


def write_manifest(out_dir: Path, status: dict[int, str]) -> None:
    lines = [f"rep_{k} {status[k]}" for k in sorted(status)]
    state = "complete" if all(v == "complete" for v in status.values()) else "incomplete"
    (out_dir / "MANIFEST").write_text(f"status {state}\n" + "\n".join(lines) + "\n", encoding="utf-8")


def run_replications(plan: RunPlan, out_dir, replications: int | None = None,
                     jobs: int = 1, figures: bool = True) -> list[RunResult]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = replications or plan.scenario.replications
    log_events = os.environ.get("SIM_LOG", "").lower() == "debug"
    status = dict.fromkeys(range(n), "incomplete")
    results: list[RunResult] = []
    _write_plan(plan, out_dir, n)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for res in pool.map(_worker, [(plan, k, out_dir, log_events) for k in range(n)]):
                    results.append(res)
                    status[res.replication_index] = "complete"
        else:
            for k in range(n):
                results.append(_worker((plan, k, out_dir, log_events)))
                status[k] = "complete"
    except Exception as exc:
        write_manifest(out_dir, status)
        raise SimulationFailed(f"replication failed: {exc!r}") from exc

    results.sort(key=lambda r: r.replication_index)
    _write_csv(out_dir / "aggregate.csv", ["metric", "n", "mean", "ci95_low", "ci95_high"],
               aggregate(results))
    if figures:
        from . import plots
        plots.render_run_figures(out_dir, results, plan)
    write_manifest(out_dir, status)
    return results


def _write_plan(plan: RunPlan, out_dir: Path, replications: int) -> None:
    sc = plan.scenario
    info = {
        "scenario": sc.name,
        "seed": sc.seed,
        "replications": replications,
        "arrival_rate_per_hour": sc.arrival_rate_per_hour,
        "checkin_points": sc.checkin_points,
        "security_points": sc.security_points,
        "police_officers": sc.police_officers,
        "foreign_fraction": sc.foreign_fraction,
        "boarding_lead_min": sc.boarding_lead_min,
        "flights": plan.flight_table(),
        "flights_digest": plan.flights_digest,
        "stations": sc.required_stations() + [f"gate_{f.id}" for f in plan.flights],
    }
    (out_dir / "run.json").write_text(json.dumps(info, indent=2, ensure_ascii=False) + "\n",
                                      encoding="utf-8")


def read_summary(rep_dir: Path) -> dict[tuple[str, str, str], str]:
    with (Path(rep_dir) / "summary.csv").open(newline="", encoding="utf-8") as fh:
        return {(r["scope"], r["id"], r["metric"]): r["value"] for r in csv.DictReader(fh)}


def missed_at(sim: Simulation) -> dict[str, int]:
    counts: dict[str, int] = {}
    for p in sim.passengers.values():
        if p.stage is Stage.MissedFlight:
            counts[p.missed_stage.value] = counts.get(p.missed_stage.value, 0) + 1
    return counts
