"""Scenario configuration and cross-validated run plans."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import flights as flights_mod
from . import layout as layout_mod
from .engine import from_clock
from .flights import Flight, load_flights
from .layout import Layout, load_layout
from .stochastics import (
    ConstantSpeed,
    InvalidParams,
    SpeedDistribution,
    TriangularParams,
)


class ConfigError(ValueError):
    """Bad or inconsistent input files; the CLI maps it to exit code 1."""


CONFIG_ERRORS = (
    ConfigError,
    layout_mod.ParseError,
    layout_mod.ValidationError,
    flights_mod.ParseError,
    flights_mod.OutOfHorizon,
    InvalidParams,
)

DEFAULT_SERVICE = {
    "checkin": {"type": "triangular", "min": 0.5, "mode": 1.0, "max": 1.5, "unit": "min"},
    "security": {"type": "triangular", "min": 0.5, "mode": 1.0, "max": 5.0, "unit": "min"},
    "police": {"type": "triangular", "min": 2.0, "mode": 6.0, "max": 15.0, "unit": "min"},
    "gate": {"type": "triangular", "min": 0.1, "mode": 0.25, "max": 0.5, "unit": "min"},
}
DEFAULT_WALK_SPEED = {"type": "truncated_normal", "mean": 0.75167, "sd": 0.13674,
                      "min": 0.61493, "max": 0.88841}
DEFAULT_ARRIVAL_OFFSET = {"type": "triangular", "min": 45, "mode": 90, "max": 150, "unit": "min"}


@dataclass
class ScenarioConfig:
    name: str
    arrival_rate_per_hour: float
    checkin_points: dict[str, int]
    security_points: int
    police_officers: int
    foreign_fraction: float = 0.10
    boarding_lead_min: float = 60.0
    open: str = "06:00"
    close: str = "18:00"
    sample_interval_s: float = 10.0
    queue_tick_s: float = 60.0
    seed: int = 42
    replications: int = 20
    density_cell_m: float = 1.0
    walk_speed: SpeedDistribution | ConstantSpeed = field(default_factory=SpeedDistribution)
    arrival_offset: TriangularParams = field(
        default_factory=lambda: TriangularParams.from_config(DEFAULT_ARRIVAL_OFFSET))
    service: dict[str, TriangularParams] = field(
        default_factory=lambda: {k: TriangularParams.from_config(v) for k, v in DEFAULT_SERVICE.items()})
    bookings: dict[str, int] = field(default_factory=dict)
    passengers: list[dict] | None = None

    @property
    def open_hour(self) -> int:
        return int(self.open.split(":")[0])

    @property
    def horizon_end(self) -> float:
        return from_clock(self.close, self.open_hour)

    @property
    def horizon_hours(self) -> float:
        return self.horizon_end / 3600.0

    def service_seconds(self) -> dict[str, TriangularParams]:
        return {k: v.in_seconds() for k, v in self.service.items()}

    def required_stations(self) -> list[str]:
        ids = [f"checkin_{airline}_{i}"
               for airline, n in sorted(self.checkin_points.items()) for i in range(1, n + 1)]
        ids.append("police")
        ids.extend(f"security_{i}" for i in range(1, self.security_points + 1))
        return ids


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _number(raw: dict, key: str, default=None, kind=float):
    value = raw.get(key, default)
    if value is None:
        raise ConfigError(f"{key}: missing")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return kind(value)


def scenario_from_dict(raw: dict, name: str = "scenario") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("scenario: expected a JSON object")
    rate = _number(raw, "arrival_rate_per_hour")
    _require(rate > 0, "arrival_rate_per_hour", "must be > 0")

    checkin = raw.get("checkin_points")
    _require(isinstance(checkin, dict), "checkin_points", "expected {avianca: n, satena: n}")
    checkin_points = {}
    for airline in flights_mod.Airline:
        key = airline.key
        _require(key in checkin, f"checkin_points.{key}", "missing")
        n = checkin[key]
        _require(isinstance(n, int) and not isinstance(n, bool) and n >= 1,
                 f"checkin_points.{key}", "must be an integer >= 1")
        checkin_points[key] = n

    security = _number(raw, "security_points", kind=int)
    _require(security >= 1, "security_points", "must be >= 1")
    police = _number(raw, "police_officers", kind=int)
    _require(police >= 1, "police_officers", "must be >= 1")
    foreign = _number(raw, "foreign_fraction", 0.10)
    _require(0.0 <= foreign <= 1.0, "foreign_fraction", "must lie in [0, 1]")
    lead = _number(raw, "boarding_lead_min", 60.0)
    _require(lead > 0, "boarding_lead_min", "must be > 0")
    replications = _number(raw, "replications", 20, int)
    _require(replications >= 1, "replications", "must be >= 1")
    seed = _number(raw, "seed", 42, int)
    sample_dt = _number(raw, "sample_interval_s", 10.0)
    _require(sample_dt > 0, "sample_interval_s", "must be > 0")
    tick = _number(raw, "queue_tick_s", 60.0)
    _require(tick > 0, "queue_tick_s", "must be > 0")
    cell = _number(raw, "density_cell_m", 1.0)
    _require(cell > 0, "density_cell_m", "must be > 0")

    horizon = raw.get("horizon", {"open": "06:00", "close": "18:00"})
    try:
        open_, close = str(horizon["open"]), str(horizon["close"])
        oh, om = (int(x) for x in open_.split(":"))
        ch, cm = (int(x) for x in close.split(":"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"horizon: expected {{open: 'HH:MM', close: 'HH:MM'}} ({exc})") from exc
    _require(om == 0, "horizon.open", "must be on the hour")
    _require(ch * 60 + cm > oh * 60, "horizon.close", "must be after open")

    try:
        walk = SpeedDistribution.from_config(raw.get("walk_speed", DEFAULT_WALK_SPEED))
        offset = TriangularParams.from_config(raw.get("arrival_offset", DEFAULT_ARRIVAL_OFFSET))
        service_raw = {**DEFAULT_SERVICE, **raw.get("service", {})}
        service = {k: TriangularParams.from_config(service_raw[k]) for k in DEFAULT_SERVICE}
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"distribution: missing field {exc}") from exc
    except InvalidParams as exc:
        raise ConfigError(f"distribution: {exc}") from exc
    unknown = set(raw.get("service", {})) - set(DEFAULT_SERVICE)
    _require(not unknown, "service", f"unknown service kinds {sorted(unknown)}")

    bookings = raw.get("bookings", {})
    _require(isinstance(bookings, dict), "bookings", "expected {flight_id: count}")
    for fid, n in bookings.items():
        _require(isinstance(n, int) and n >= 0, f"bookings.{fid}", "must be an integer >= 0")

    passengers = raw.get("passengers")
    if passengers is not None:
        _require(isinstance(passengers, list), "passengers", "expected a list")
        parsed = []
        for i, p in enumerate(passengers):
            try:
                entry = {"flight": str(p["flight"]),
                         "arrival_s": from_clock(p["arrival"], oh),
                         "nationality": p.get("nationality", "Colombian")}
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"passengers[{i}]: {exc!r}") from exc
            _require(entry["nationality"] in ("Colombian", "Foreign"),
                     f"passengers[{i}].nationality", "must be Colombian or Foreign")
            _require(entry["arrival_s"] >= 0, f"passengers[{i}].arrival", "before opening")
            if "walk_speed" in p:
                entry["walk_speed"] = float(p["walk_speed"])
            parsed.append(entry)
        passengers = parsed

    return ScenarioConfig(
        name=str(raw.get("name", name)),
        arrival_rate_per_hour=rate,
        checkin_points=checkin_points,
        security_points=security,
        police_officers=police,
        foreign_fraction=foreign,
        boarding_lead_min=lead,
        open=open_,
        close=close,
        sample_interval_s=sample_dt,
        queue_tick_s=tick,
        seed=seed,
        replications=replications,
        density_cell_m=cell,
        walk_speed=walk,
        arrival_offset=offset,
        service=service,
        bookings={str(k): int(v) for k, v in bookings.items()},
        passengers=passengers,
    )


def load_scenario(file) -> ScenarioConfig:
    path = Path(file)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return scenario_from_dict(raw, name=path.stem)


@dataclass
class RunPlan:
    scenario: ScenarioConfig
    flights: list[Flight]
    layout: Layout
    sources: dict[str, str]
    flights_digest: str

    def flight_table(self) -> list[dict]:
        return [{"id": f.id, "airline": f.airline.value, "destination": f.destination,
                 "departure_s": f.departure} for f in self.flights]


def parse_config(scenario_file, flights_file, layout_file) -> RunPlan:
    scenario = load_scenario(scenario_file)
    flights = load_flights(flights_file, scenario.open_hour, scenario.horizon_end)
    _require(bool(flights), "flights", "schedule is empty")
    layout = load_layout(layout_file)

    for sid in scenario.required_stations():
        _require(sid in layout.station_placements, f"layout.stations.{sid}",
                 "scenario needs this station but the layout does not place it")
    ids = {f.id for f in flights}
    for fid in scenario.bookings:
        _require(fid in ids, f"bookings.{fid}", "unknown flight")
    for i, p in enumerate(scenario.passengers or []):
        _require(p["flight"] in ids, f"passengers[{i}].flight", "unknown flight")
        dep = next(f.departure for f in flights if f.id == p["flight"])
        _require(p["arrival_s"] < dep, f"passengers[{i}].arrival", "not before departure")

    content = json.dumps([[f.id, f.airline.value, f.destination, f.departure] for f in flights])
    return RunPlan(
        scenario=scenario,
        flights=flights,
        layout=layout,
        sources={"scenario": str(scenario_file), "flights": str(flights_file),
                 "layout": str(layout_file)},
        flights_digest=hashlib.sha256(content.encode()).hexdigest(),
    )
