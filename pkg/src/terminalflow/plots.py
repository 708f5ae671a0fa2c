"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .engine import OPEN_HOUR  # noqa: E402

PNG_META = {"Software": None}
KIND_COLORS = {"checkin": "tab:blue", "police": "tab:red", "security": "tab:orange",
               "gate": "tab:green"}


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata=PNG_META)
    plt.close(fig)


def _station_kind(station_id: str) -> str:
    return station_id.split("_", 1)[0]


def read_density(rep_dir: Path) -> np.ndarray:
    with (rep_dir / "density.csv").open(newline="") as fh:
        rows = [(int(r["row"]), int(r["col"]), int(r["count"])) for r in csv.DictReader(fh)]
    height = max(r for r, _, _ in rows) + 1
    width = max(c for _, c, _ in rows) + 1
    grid = np.zeros((height, width), dtype=np.int64)
    for r, c, n in rows:
        grid[r, c] = n
    return grid


def read_queue_kinds(rep_dir: Path) -> dict[str, tuple[list[float], list[int]]]:
    """Load summed per station kind after every change, in time order."""
    current: dict[str, int] = defaultdict(int)
    out: dict[str, tuple[list[float], list[int]]] = {}
    with (rep_dir / "queues.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            t, sid, load = float(row["time_s"]), row["station_id"], int(row["load"])
            kind = _station_kind(sid)
            before = sum(v for k, v in current.items() if _station_kind(k) == kind)
            current[sid] = load
            after = sum(v for k, v in current.items() if _station_kind(k) == kind)
            if after != before or kind not in out:
                ts, ls = out.setdefault(kind, ([], []))
                ts.append(t)
                ls.append(after)
    return out


def plot_density(counts: np.ndarray, path: Path, title: str, cell_m: float = 1.0) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.6))
    h, w = counts.shape
    im = ax.imshow(counts, origin="lower", cmap="magma", extent=(0, w * cell_m, 0, h * cell_m),
                   interpolation="nearest")
    fig.colorbar(im, ax=ax, label="presence samples")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_queue_loads(kinds: dict[str, tuple[list[float], list[int]]], path: Path, title: str,
                     horizon_s: float = 43200.0) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.6))
    for kind in ("checkin", "police", "security", "gate"):
        if kind not in kinds:
            continue
        ts, ls = kinds[kind]
        hours = [OPEN_HOUR + t / 3600.0 for t in ts] + [OPEN_HOUR + horizon_s / 3600.0]
        ax.step(hours, ls + ls[-1:], where="post", label=kind, color=KIND_COLORS[kind], lw=1)
    ax.set_xlim(OPEN_HOUR, OPEN_HOUR + horizon_s / 3600.0)
    ax.set_xlabel("hour of day")
    ax.set_ylabel("passengers queued or in service")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def render_run_figures(out_dir: Path, results, plan) -> None:
    out_dir = Path(out_dir)
    total = None
    for res in results:
        grid = read_density(out_dir / f"rep_{res.replication_index}")
        total = grid if total is None else total + grid
    name = plan.scenario.name
    plot_density(total, out_dir / "figures" / "density.png",
                 f"{name}: passenger presence, {len(results)} replications",
                 plan.scenario.density_cell_m)
    first = results[0].replication_index
    plot_queue_loads(read_queue_kinds(out_dir / f"rep_{first}"),
                     out_dir / "figures" / "queues.png",
                     f"{name}: station load by kind (replication {first})",
                     plan.scenario.horizon_end)


def plot_comparison(rows: list[dict], path: Path) -> None:
    names = [r["name"] for r in rows]
    means = np.array([r["mean"] for r in rows]) / 60.0
    lo = np.array([r["ci_low"] for r in rows]) / 60.0
    hi = np.array([r["ci_high"] for r in rows]) / 60.0
    err = np.vstack([np.nan_to_num(means - lo), np.nan_to_num(hi - means)])
    colors = ["tab:red" if r["collapsed"] else "tab:blue" for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.bar(names, means, yerr=err, capsize=4, color=colors)
    ax.set_ylabel("mean boarding time (min)")
    ax.set_title("Scenario comparison (red: collapsed)")
    fig.tight_layout()
    _save(fig, path)
