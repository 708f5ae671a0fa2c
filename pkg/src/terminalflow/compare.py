"""Cross-scenario comparison report."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .engine import to_clock

LOAD_THRESHOLD = 10.0
MISSED_THRESHOLD = 0.05


class IncompatibleRuns(ValueError):
    pass


def _read_aggregate(run_dir: Path) -> dict[str, dict[str, float]]:
    out = {}
    with (run_dir / "aggregate.csv").open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["metric"]] = {k: float(row[k]) if row[k] != "" else float("nan")
                                  for k in ("n", "mean", "ci95_low", "ci95_high")}
    return out


def load_run(run_dir) -> dict:
    run_dir = Path(run_dir)
    info = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    agg = _read_aggregate(run_dir)
    loads = {k.split(".", 1)[1]: v["mean"] for k, v in agg.items() if k.startswith("time_avg_load.")}
    missed_fraction = agg["missed_fraction"]["mean"]
    worst = max(loads.items(), key=lambda kv: kv[1])
    collapsed = worst[1] > LOAD_THRESHOLD or missed_fraction > MISSED_THRESHOLD
    return {
        "dir": str(run_dir),
        "name": info["scenario"],
        "info": info,
        "mean": agg["mean_boarding_time_s"]["mean"],
        "ci_low": agg["mean_boarding_time_s"]["ci95_low"],
        "ci_high": agg["mean_boarding_time_s"]["ci95_high"],
        "missed_total": agg["overall.missed"]["mean"] * agg["overall.missed"]["n"],
        "missed_fraction": missed_fraction,
        "loads": loads,
        "worst_station": worst,
        "peak_time_s": agg["peak_time_s"],
        "peak_load": agg["peak_load"],
        "collapsed": collapsed,
    }


def compare_scenarios(run_dirs, out_file=None, figure: bool = True) -> tuple[str, list[dict]]:
    if len(run_dirs) < 2:
        raise ValueError("need at least two run directories")
    runs = [load_run(d) for d in run_dirs]
    digest = runs[0]["info"]["flights_digest"]
    for r in runs[1:]:
        if r["info"]["flights_digest"] != digest:
            raise IncompatibleRuns(f"{r['dir']} used a different flight schedule than {runs[0]['dir']}")
    ranked = sorted(runs, key=lambda r: r["mean"])  # stable: ties keep directory order

    lines = [
        "# Scenario comparison",
        "",
        f"Collapse flag (thresholds defined by this tool, not measured values): any station with "
        f"time-average load above {LOAD_THRESHOLD:g} passengers, or more than "
        f"{MISSED_THRESHOLD:.0%} of passengers missing their flight.",
        "",
        "## Ranking by mean boarding time",
        "",
        "| rank | scenario | mean boarding time (min) | 95% CI (min) | missed total | missed % | collapsed |",
        "|---:|---|---:|---|---:|---:|---|",
    ]
    for i, r in enumerate(ranked, start=1):
        lines.append(
            f"| {i} | {r['name']} | {r['mean'] / 60:.2f} | "
            f"[{r['ci_low'] / 60:.2f}, {r['ci_high'] / 60:.2f}] | {r['missed_total']:.0f} | "
            f"{100 * r['missed_fraction']:.1f} | {'yes' if r['collapsed'] else 'no'} |"
        )
    stations = sorted({s for r in runs for s in r["loads"] if not s.startswith("gate_")})
    lines += ["", "## Time-average station load (passengers, mean over replications)", "",
              "| scenario | " + " | ".join(stations) + " |",
              "|---|" + "---:|" * len(stations)]
    for r in ranked:
        cells = [f"{r['loads'][s]:.2f}" if s in r["loads"] else "-" for s in stations]
        lines.append(f"| {r['name']} | " + " | ".join(cells) + " |")
    lines += ["", "## Peak aggregate load", "",
              "| scenario | mean peak time | 95% CI | mean peak load |", "|---|---|---|---:|"]
    for r in ranked:
        pt = r["peak_time_s"]
        ci = (f"{to_clock(pt['ci95_low'])}-{to_clock(pt['ci95_high'])}"
              if pt["ci95_low"] == pt["ci95_low"] else "-")
        lines.append(f"| {r['name']} | {to_clock(pt['mean'])} | {ci} | {r['peak_load']['mean']:.1f} |")
    report = "\n".join(lines) + "\n"

    if out_file is not None:
        out_file = Path(out_file)
        out_file.parent.mkdir(parents=True, exist_ok=True)
        if figure:
            from .plots import plot_comparison
            fig_path = out_file.with_name(out_file.stem + "_boarding.png")
            plot_comparison(ranked, fig_path)
            report += f"\n![mean boarding time by scenario]({fig_path.name})\n"
        out_file.write_text(report, encoding="utf-8")
    return report, ranked
