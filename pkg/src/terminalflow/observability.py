"""Performance indicators: density map, queue-size series and boarding-time statistics."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-12


class InsufficientData(ValueError):
    pass


@dataclass(slots=True)
class Visit:
    """One passenger's stay at one station; ``end`` is service end or removal time."""

    pid: int
    station_id: str
    join: float
    start: float | None = None
    end: float | None = None
    completed: bool = False


class QueueSeries:
    """Load (queued + in service) per station, recorded at every change and at ticks.

    Between observations the load is constant, so the series reconstructs the
    load at any instant exactly.
    """

    def __init__(self, station_ids) -> None:
        self.station_ids = list(station_ids)
        self.obs: dict[str, list[tuple[float, int]]] = {sid: [] for sid in self.station_ids}
        self.rows: list[tuple[float, str, int, bool]] = []
        self.end: float | None = None

    def record(self, t: float, station_id: str, load: int, tick: bool = False) -> None:
        self.obs[station_id].append((t, load))
        self.rows.append((t, station_id, load, tick))

    def close(self, end: float) -> None:
        self.end = end

    def load_at(self, station_id: str, t: float) -> int:
        value = 0
        for ot, load in self.obs[station_id]:
            if ot > t:
                break
            value = load
        return value

    def integral(self, station_id: str, start: float = 0.0, end: float | None = None) -> float:
        end = self.end if end is None else end
        total = 0.0
        prev_t, prev_load = start, 0
        for t, load in self.obs[station_id]:
            if t <= start:
                prev_load = load
                continue
            if t >= end:
                break
            total += prev_load * (t - prev_t)
            prev_t, prev_load = t, load
        return total + prev_load * (end - prev_t)

    def time_average(self, station_id: str, start: float = 0.0, end: float | None = None) -> float:
        end = self.end if end is None else end
        return self.integral(station_id, start, end) / (end - start)

    def max_load(self, station_id: str) -> int:
        return max((load for _, load in self.obs[station_id]), default=0)

    def changes(self, station_id: str) -> list[tuple[float, int]]:
        """Observations with the tick duplicates dropped."""
        out = []
        last = 0
        for t, load in self.obs[station_id]:
            if load != last:
                out.append((t, load))
                last = load
        return out


def peak_window(series: QueueSeries) -> tuple[float, int]:
    """Earliest instant at which the load summed over all stations is maximal."""
    current = dict.fromkeys(series.station_ids, 0)
    total = 0
    best_t, best = 0.0, 0
    rows = series.rows
    i = 0
    while i < len(rows):
        t = rows[i][0]
        while i < len(rows) and rows[i][0] == t:
            _, sid, load, _ = rows[i]
            total += load - current[sid]
            current[sid] = load
            i += 1
        if total > best:
            best_t, best = t, total
    return best_t, best


class DensityGrid:
    """Presence counts on a square grid; row 0 is the southern edge."""

    def __init__(self, cell_size_m: float, width: int, height: int) -> None:
        self.cell_size_m = cell_size_m
        self.width = width
        self.height = height
        self.counts = np.zeros((height, width), dtype=np.int64)
        self.samples = 0

    @classmethod
    def for_layout(cls, layout, cell_size_m: float = 1.0) -> "DensityGrid":
        max_x, max_y = layout.bounding_box()
        return cls(cell_size_m, int(max_x // cell_size_m) + 1, int(max_y // cell_size_m) + 1)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        col = min(max(int(x // self.cell_size_m), 0), self.width - 1)
        row = min(max(int(y // self.cell_size_m), 0), self.height - 1)
        return row, col

    def add(self, x: float, y: float) -> None:
        row, col = self.cell_of(x, y)
        self.counts[row, col] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """0-255 image, north at the top; all zeros when nothing was sampled."""
        peak = int(self.counts.max()) if self.counts.size else 0
        if peak == 0:
            img = np.zeros_like(self.counts)
        else:
            img = np.floor(255.0 * self.counts / peak + 0.5).astype(np.int64)
        return img[::-1]

    def to_pgm(self) -> str:
        img = self.normalized()
        lines = ["P2", f"{self.width} {self.height}", "255"]
        lines.extend(" ".join(str(int(v)) for v in row) for row in img)
        return "\n".join(lines) + "\n"


def nearest_rank(sorted_values: list[float], q: float) -> float:
    k = max(math.ceil(q * len(sorted_values)), 1)
    return sorted_values[k - 1]


def _stats(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "median": None, "p95": None, "max": None}
    ordered = sorted(values)
    return {
        "mean": math.fsum(ordered) / len(ordered),
        "median": statistics.median(ordered),
        "p95": nearest_rank(ordered, 0.95),
        "max": ordered[-1],
    }


def boarding_time(pax) -> float:
    return pax.timestamps["board"] - pax.timestamps["enter"]


def boarding_time_stats(passengers, flight_ids=None) -> dict:
    """Boarding-time statistics in seconds, overall and per flight.

    Missed passengers only show up in the counts. Statistics over an empty
    set of boarded passengers are ``None``.
    """
    groups: dict[str, list] = {fid: [] for fid in (flight_ids or [])}
    for p in passengers:
        groups.setdefault(p.flight_id, []).append(p)
    result = {}
    everyone = []
    for fid, members in list(groups.items()) + [("overall", None)]:
        members = everyone if members is None else members
        if fid != "overall":
            everyone.extend(members)
        boarded = [boarding_time(p) for p in members if "board" in p.timestamps]
        entry = {"generated": len(members), "boarded": len(boarded),
                 "missed": len(members) - len(boarded)}
        entry.update(_stats(boarded))
        result[fid] = entry
    return result


@dataclass
class LittleCheck:
    L: float
    throughput: float
    W: float
    span: float
    completions: int
    relative_error: float = field(init=False)

    def __post_init__(self) -> None:
        self.relative_error = abs(self.L - self.throughput * self.W) / max(self.L, EPS)


def littles_law_check(series: QueueSeries, visits, station_id: str,
                      min_completions: int = 200) -> LittleCheck:
    """Compare time-average load with throughput x mean sojourn over the active span."""
    mine = [v for v in visits if v.station_id == station_id]
    done = [v for v in mine if v.completed]
    if len(done) < min_completions or not done:
        raise InsufficientData(f"{station_id}: {len(done)} completed services")
    start = min(v.join for v in mine)
    end = max(v.end for v in mine)
    span = end - start
    L = series.integral(station_id, start, end) / span
    W = math.fsum(v.end - v.join for v in done) / len(done)
    return LittleCheck(L, len(done) / span, W, span, len(done))
