"""Flight schedule ingestion, boarding planning and booked-passenger generation."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

from .engine import HORIZON_END, OPEN_HOUR
from .stochastics import (
    RngStream,
    TriangularParams,
    derive_stream,
    sample_triangular,
    sample_walking_speed,
)

FLIGHT_COLUMNS = ["destination", "airline", "departure"]
SERVICE_KINDS = ("checkin", "police", "security", "gate")


class ParseError(ValueError):
    pass


class OutOfHorizon(ValueError):
    pass


class Airline(enum.Enum):
    Avianca = "Avianca"
    Satena = "Satena"

    @property
    def key(self) -> str:
        return self.value.lower()


class Nationality(enum.Enum):
    Colombian = "Colombian"
    Foreign = "Foreign"


class Stage(enum.Enum):
    PreArrival = "PreArrival"
    ToCheckIn = "ToCheckIn"
    InCheckInQueue = "InCheckInQueue"
    InCheckInService = "InCheckInService"
    ToPolice = "ToPolice"
    InPoliceQueue = "InPoliceQueue"
    InPoliceService = "InPoliceService"
    ToHall = "ToHall"
    Waiting = "Waiting"
    ToSecurity = "ToSecurity"
    InSecurityQueue = "InSecurityQueue"
    InSecurityService = "InSecurityService"
    ToGate = "ToGate"
    InGateQueue = "InGateQueue"
    InGateService = "InGateService"
    Boarded = "Boarded"
    MissedFlight = "MissedFlight"


TERMINAL_STAGES = (Stage.Boarded, Stage.MissedFlight)


@dataclass
class Flight:
    id: str
    airline: Airline
    destination: str
    departure: float
    boarding_start: float | None = None
    booked: list[int] = field(default_factory=list)
    gate_closed: bool = False
    boarding_open: bool = False

    @property
    def label(self) -> str:
        return f"{self.destination} ({self.airline.value})"


@dataclass(slots=True)
class Passenger:
    id: int
    flight_id: str
    nationality: Nationality
    walk_speed: float
    arrival: float
    service_u: dict[str, float]
    stage: Stage = Stage.PreArrival
    timestamps: dict[str, float] = field(default_factory=dict)
    stations: dict[str, str] = field(default_factory=dict)
    missed_stage: Stage | None = None

    @property
    def foreign(self) -> bool:
        return self.nationality is Nationality.Foreign


def load_flights(file, open_hour: int = OPEN_HOUR, horizon_end: float = HORIZON_END) -> list[Flight]:
    path = Path(file)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != FLIGHT_COLUMNS:
                raise ParseError(f"{path}: header must be {','.join(FLIGHT_COLUMNS)}")
            rows = list(reader)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc

    parsed = []
    for lineno, row in enumerate(rows, start=2):
        try:
            when = datetime.fromisoformat(row["departure"].strip())
            airline = Airline(row["airline"].strip())
        except (ValueError, AttributeError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        destination = (row["destination"] or "").strip()
        if not destination:
            raise ParseError(f"{path}:{lineno}: empty destination")
        opening = when.replace(hour=open_hour, minute=0, second=0, microsecond=0)
        seconds = (when - opening).total_seconds()
        if seconds < 0 or seconds > horizon_end:
            raise OutOfHorizon(f"{path}:{lineno}: departure {when:%H:%M} outside the operating day")
        parsed.append((seconds, lineno, destination, airline))

    parsed.sort(key=lambda item: (item[0], item[1]))
    return [
        Flight(id=f"F{i + 1}", airline=airline, destination=dest, departure=secs)
        for i, (secs, _, dest, airline) in enumerate(parsed)
    ]


def plan_boarding(flight: Flight, boarding_lead: float, open: float = 0.0) -> Flight:
    """Return a copy with ``boarding_start`` set; ``boarding_lead`` is in minutes."""
    if boarding_lead <= 0:
        raise ValueError("boarding lead must be positive")
    return replace(flight, boarding_start=max(flight.departure - boarding_lead * 60.0, open))


class Streams:
    """Per-replication random streams, one per purpose."""

    LABELS = ("arrival", "nationality", "speed", "service")

    def __init__(self, master_seed: int, replication_index: int) -> None:
        self.master_seed = master_seed
        self.replication_index = replication_index
        for label in self.LABELS:
            setattr(self, label, derive_stream(master_seed, replication_index, label))

    arrival: RngStream
    nationality: RngStream
    speed: RngStream
    service: RngStream


def bookings_per_flight(rate_per_hour: float, horizon_hours: float, flight_count: int) -> int:
    return int(round(rate_per_hour * horizon_hours / flight_count))


def generate_passengers(flight: Flight, scenario, streams: Streams, first_id: int,
                        flight_count: int) -> list[Passenger]:
    """Book passengers onto ``flight`` and draw their attributes.

    Draw order is fixed (offset, nationality, speed, four service uniforms per
    passenger, each from its own stream) so that scenarios with the same
    demand share passengers replication by replication.
    """
    n = scenario.bookings.get(flight.id)
    if n is None:
        n = bookings_per_flight(scenario.arrival_rate_per_hour, scenario.horizon_hours, flight_count)
    offset: TriangularParams = scenario.arrival_offset.in_seconds()
    passengers = []
    for k in range(n):
        lead = sample_triangular(offset, streams.arrival)
        arrival = max(flight.departure - lead, 0.0)
        foreign = streams.nationality.random() < scenario.foreign_fraction
        speed = sample_walking_speed(scenario.walk_speed, streams.speed)
        u = streams.service.random(len(SERVICE_KINDS))
        pax = Passenger(
            id=first_id + k,
            flight_id=flight.id,
            nationality=Nationality.Foreign if foreign else Nationality.Colombian,
            walk_speed=float(speed),
            arrival=float(arrival),
            service_u=dict(zip(SERVICE_KINDS, map(float, u))),
        )
        passengers.append(pax)
    flight.booked = [p.id for p in passengers]
    return passengers
