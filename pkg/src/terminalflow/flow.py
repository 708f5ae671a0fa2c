"""Boarding pipeline: service stations, queue choice and the passenger state machine.

Route per passenger::

    entrance -> check-in desk -> [police office, foreigners only] -> waiting hall
             -> (flight boarding started) -> security point -> gate check -> aircraft

At each decision point the passenger commits to the candidate with the
smallest load, counting queued, in-service and already-committed walkers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .engine import Engine, EventKind
from .flights import (
    Flight,
    Nationality,
    SERVICE_KINDS,
    Passenger,
    Stage,
    Streams,
    generate_passengers,
    plan_boarding,
)
from .layout import Layout, Path, position_at, travel_time
from .observability import DensityGrid, QueueSeries, Visit
from .stochastics import (
    TriangularParams,
    derive_stream,
    sample_triangular,
    sample_walking_speed,
    triangular_ppf,
)


class EmptyCandidates(ValueError):
    pass


class IllegalTransition(RuntimeError):
    pass


class NoFreeServer(RuntimeError):
    pass


_QUEUE_STAGE = {
    "checkin": (Stage.InCheckInQueue, Stage.InCheckInService),
    "police": (Stage.InPoliceQueue, Stage.InPoliceService),
    "security": (Stage.InSecurityQueue, Stage.InSecurityService),
    "gate": (Stage.InGateQueue, Stage.InGateService),
}
_WALK_STAGES = {Stage.ToCheckIn, Stage.ToPolice, Stage.ToHall, Stage.ToSecurity, Stage.ToGate}
_QUEUE_STAGES = {q for q, _ in _QUEUE_STAGE.values()}
_SERVICE_STAGES = {s for _, s in _QUEUE_STAGE.values()}


@dataclass(eq=False)
class ServiceStation:
    id: str
    kind: str
    server_count: int
    service_dist: TriangularParams
    node: str
    airline: str | None = None
    queue: deque = field(default_factory=deque)
    in_service: dict[int, int] = field(default_factory=dict)
    inbound: int = 0
    completions: int = 0

    def __post_init__(self) -> None:
        if self.server_count < 1:
            raise ValueError(f"{self.id}: server_count must be >= 1")

    @property
    def busy_servers(self) -> int:
        return len(self.in_service)

    @property
    def load(self) -> int:
        return len(self.queue) + len(self.in_service)

    @property
    def selection_load(self) -> int:
        return len(self.queue) + len(self.in_service) + self.inbound


def select_queue(stations: list[ServiceStation]) -> ServiceStation:
    """Least-loaded candidate, ties to the lowest station id."""
    if not stations:
        raise EmptyCandidates("no candidate stations")
    return min(stations, key=lambda s: (s.selection_load, s.id))


@dataclass
class _Walk:
    path: Path
    speed: float
    depart: float
    event_id: int
    station: ServiceStation | None


class Simulation:
    """One replication of the terminal model."""

    def __init__(self, scenario, flights: list[Flight], layout: Layout,
                 replication_index: int = 0, log_events: bool = False,
                 collect_density: bool = True) -> None:
        self.scenario = scenario
        self.layout = layout
        self.replication_index = replication_index
        self.horizon_end = scenario.horizon_end
        self.engine = Engine(log_events=log_events)
        self.streams = Streams(scenario.seed, replication_index)
        self.collect_density = collect_density

        self.flights: dict[str, Flight] = {}
        for f in flights:
            planned = plan_boarding(f, scenario.boarding_lead_min, 0.0)
            planned.booked = []
            self.flights[planned.id] = planned

        self.stations: dict[str, ServiceStation] = {}
        self.checkin: dict[str, list[ServiceStation]] = {}
        self.security: list[ServiceStation] = []
        self.gates: dict[str, ServiceStation] = {}
        self._build_stations()

        self.passengers: dict[int, Passenger] = {}
        self.present: dict[int, None] = {}
        self.walking: dict[int, _Walk] = {}
        self.spot: dict[int, tuple[float, float]] = {}
        self.waiting: dict[str, list[int]] = {fid: [] for fid in self.flights}
        self.open_visits: dict[int, Visit] = {}
        self.visits: list[Visit] = []
        self._hall_joins = 0

        self.queue_series = QueueSeries(sorted(self.stations))
        self.density = DensityGrid.for_layout(layout, scenario.density_cell_m)

        eng = self.engine
        eng.on(EventKind.PassengerArrival, self._on_arrival)
        eng.on(EventKind.WalkComplete, self._on_walk_complete)
        eng.on(EventKind.ServiceComplete, self._on_service_complete)
        eng.on(EventKind.BoardingStart, self._on_boarding_start)
        eng.on(EventKind.FlightDeparture, self._on_departure)
        eng.on(EventKind.DensitySample, self._on_density_sample)
        eng.on(EventKind.QueueSample, self._on_queue_sample)
        self._setup()

    # ------------------------------------------------------------------ setup

    def _build_stations(self) -> None:
        sc = self.scenario
        placements = self.layout.station_placements
        service = sc.service_seconds()
        for airline_key, count in sorted(sc.checkin_points.items()):
            desks = []
            for i in range(1, count + 1):
                sid = f"checkin_{airline_key}_{i}"
                desks.append(ServiceStation(sid, "checkin", 1, service["checkin"],
                                            placements[sid], airline=airline_key))
            self.checkin[airline_key] = desks
        police = ServiceStation("police", "police", sc.police_officers, service["police"],
                                placements["police"])
        self.police = police
        for i in range(1, sc.security_points + 1):
            sid = f"security_{i}"
            self.security.append(ServiceStation(sid, "security", 1, service["security"],
                                                placements[sid]))
        for fid in self.flights:
            self.gates[fid] = ServiceStation(f"gate_{fid}", "gate", 1, service["gate"],
                                             self.layout.gate_node)
        for st in [*(d for ds in self.checkin.values() for d in ds), police,
                   *self.security, *self.gates.values()]:
            self.stations[st.id] = st

    def _setup(self) -> None:
        eng = self.engine
        sc = self.scenario
        # samplers first: at equal times they observe the state before any change
        if self.collect_density:
            for t in np.arange(0.0, self.horizon_end + 1e-9, sc.sample_interval_s):
                eng.schedule(float(t), EventKind.DensitySample)
        for t in np.arange(0.0, self.horizon_end + 1e-9, sc.queue_tick_s):
            eng.schedule(float(t), EventKind.QueueSample)
        for f in self.flights.values():
            eng.schedule(f.boarding_start, EventKind.BoardingStart, f.id)
            eng.schedule(f.departure, EventKind.FlightDeparture, f.id)

        if sc.passengers is not None:
            pax = self._explicit_passengers()
        else:
            pax = []
            flights = list(self.flights.values())
            for f in flights:
                pax.extend(generate_passengers(f, sc, self.streams, len(pax) + 1, len(flights)))
        for p in sorted(pax, key=lambda p: (p.arrival, p.id)):
            self.passengers[p.id] = p
            eng.schedule(p.arrival, EventKind.PassengerArrival, p.id)
        self.passengers = dict(sorted(self.passengers.items()))

    def _explicit_passengers(self) -> list[Passenger]:
        sc = self.scenario
        speed_stream = self.streams.speed
        out = []
        for i, entry in enumerate(sc.passengers, start=1):
            flight = self.flights[entry["flight"]]
            u = self.streams.service.random(4)
            p = Passenger(
                id=i,
                flight_id=flight.id,
                nationality=Nationality(entry.get("nationality", "Colombian")),
                walk_speed=float(entry.get("walk_speed") or sample_walking_speed(sc.walk_speed, speed_stream)),
                arrival=float(entry["arrival_s"]),
                service_u=dict(zip(SERVICE_KINDS, map(float, u))),
            )
            flight.booked.append(p.id)
            out.append(p)
        return out

    # ------------------------------------------------------------ run / query

    def run(self):
        summary = self.engine.run_until(self.horizon_end)
        self.queue_series.close(self.horizon_end)
        return summary

    @property
    def clock(self) -> float:
        return self.engine.clock

    def _record(self, station: ServiceStation) -> None:
        self.queue_series.record(self.engine.clock, station.id, station.load)

    # ------------------------------------------------------------- movement

    def _walk(self, pax: Passenger, from_node: str, to_node: str, stage: Stage,
              station: ServiceStation | None = None) -> None:
        path = self.layout.path(from_node, to_node)
        now = self.engine.clock
        eid = self.engine.schedule(now + travel_time(path, pax.walk_speed),
                                   EventKind.WalkComplete, pax.id)
        if station is not None:
            station.inbound += 1
        pax.stage = stage
        self.walking[pax.id] = _Walk(path, pax.walk_speed, now, eid, station)
        self.spot.pop(pax.id, None)

    def _on_arrival(self, event) -> None:
        pax = self.passengers[event.payload]
        if pax.stage is not Stage.PreArrival:
            raise IllegalTransition(f"passenger {pax.id} arrived twice")
        flight = self.flights[pax.flight_id]
        pax.timestamps["enter"] = self.engine.clock
        self.present[pax.id] = None
        desk = select_queue(self.checkin[flight.airline.key])
        self._walk(pax, self.layout.entrance_node, desk.node, Stage.ToCheckIn, desk)

    def _on_walk_complete(self, event) -> None:
        pax = self.passengers[event.payload]
        walk = self.walking.pop(pax.id)
        station = walk.station
        if station is None:
            if pax.stage is not Stage.ToHall:
                raise IllegalTransition(f"passenger {pax.id}: walk ended in {pax.stage}")
            self._enter_hall(pax)
            return
        station.inbound -= 1
        self._join(station, pax)

    # ------------------------------------------------------------- stations

    def _join(self, station: ServiceStation, pax: Passenger) -> None:
        now = self.engine.clock
        pax.stage = _QUEUE_STAGE[station.kind][0]
        pax.timestamps[f"{station.kind}_join"] = now
        pax.stations[station.kind] = station.id
        self.spot[pax.id] = self.layout.coords(station.node)
        self.open_visits[pax.id] = Visit(pax.id, station.id, now)
        station.queue.append(pax.id)
        self._record(station)
        self._try_start(station)

    def _try_start(self, station: ServiceStation) -> None:
        while station.queue and station.busy_servers < station.server_count:
            self.start_service(station, self.passengers[station.queue.popleft()])

    def start_service(self, station: ServiceStation, pax: Passenger) -> int:
        if station.busy_servers >= station.server_count:
            raise NoFreeServer(station.id)
        now = self.engine.clock
        duration = triangular_ppf(station.service_dist, pax.service_u[station.kind])
        eid = self.engine.schedule(now + duration, EventKind.ServiceComplete, (station.id, pax.id))
        station.in_service[pax.id] = eid
        pax.stage = _QUEUE_STAGE[station.kind][1]
        pax.timestamps[f"{station.kind}_start"] = now
        self.open_visits[pax.id].start = now
        return eid

    def _on_service_complete(self, event) -> None:
        station_id, pid = event.payload
        self.finish_service(self.stations[station_id], self.passengers[pid])

    def finish_service(self, station: ServiceStation, pax: Passenger) -> None:
        now = self.engine.clock
        del station.in_service[pax.id]
        station.completions += 1
        pax.timestamps[f"{station.kind}_end"] = now
        visit = self.open_visits.pop(pax.id)
        visit.end = now
        visit.completed = True
        self.visits.append(visit)
        self._record(station)
        self._try_start(station)
        self.advance_stage(pax, station)

    def advance_stage(self, pax: Passenger, station: ServiceStation) -> Stage:
        layout = self.layout
        kind = station.kind
        if kind == "checkin":
            if pax.foreign:
                self._walk(pax, station.node, self.police.node, Stage.ToPolice, self.police)
            else:
                self._walk(pax, station.node, layout.waiting_zone.anchor_node, Stage.ToHall)
        elif kind == "police":
            if not pax.foreign:
                raise IllegalTransition(f"passenger {pax.id} is not foreign but left police")
            self._walk(pax, station.node, layout.waiting_zone.anchor_node, Stage.ToHall)
        elif kind == "security":
            gate = self.gates[pax.flight_id]
            self._walk(pax, station.node, gate.node, Stage.ToGate, gate)
        elif kind == "gate":
            pax.stage = Stage.Boarded
            pax.timestamps["board"] = self.engine.clock
            self._leave_terminal(pax)
        else:
            raise IllegalTransition(f"unknown station kind {kind!r}")
        return pax.stage

    # ----------------------------------------------------------- hall/flights

    def _enter_hall(self, pax: Passenger) -> None:
        zone = self.layout.waiting_zone
        pax.stage = Stage.Waiting
        pax.timestamps["hall_enter"] = self.engine.clock
        self.spot[pax.id] = zone.cell_points[self._hall_joins % len(zone.cell_points)]
        self._hall_joins += 1
        if self.flights[pax.flight_id].boarding_open:
            self._release(pax)
        else:
            self.waiting[pax.flight_id].append(pax.id)

    def _release(self, pax: Passenger) -> None:
        pax.timestamps["hall_leave"] = self.engine.clock
        point = select_queue(self.security)
        self._walk(pax, self.layout.waiting_zone.anchor_node, point.node, Stage.ToSecurity, point)

    def _on_boarding_start(self, event) -> None:
        self.start_boarding(self.flights[event.payload])

    def start_boarding(self, flight: Flight) -> None:
        flight.boarding_open = True
        waiting, self.waiting[flight.id] = self.waiting[flight.id], []
        for pid in waiting:
            self._release(self.passengers[pid])

    def _on_departure(self, event) -> None:
        self.depart_flight(self.flights[event.payload])

    def depart_flight(self, flight: Flight) -> None:
        flight.gate_closed = True
        now = self.engine.clock
        left = [self.passengers[pid] for pid in flight.booked
                if self.passengers[pid].stage not in (Stage.Boarded, Stage.MissedFlight)]
        touched: dict[str, ServiceStation] = {}
        # queued and walking passengers go first so freed servers never pick up
        # someone who is about to be removed
        for pax in left:
            stage = pax.stage
            if stage in _WALK_STAGES:
                walk = self.walking.pop(pax.id)
                self.engine.cancel(walk.event_id)
                if walk.station is not None:
                    walk.station.inbound -= 1
            elif stage in _QUEUE_STAGES:
                station = self.stations[pax.stations[_kind_of(stage)]]
                station.queue.remove(pax.id)
                self._close_visit(pax, now)
                self._record(station)
            elif stage is Stage.Waiting:
                self.waiting[flight.id].remove(pax.id)
            elif stage is Stage.PreArrival:
                raise IllegalTransition(f"passenger {pax.id} never arrived before departure")
        for pax in left:
            if pax.stage in _SERVICE_STAGES:
                station = self.stations[pax.stations[_kind_of(pax.stage)]]
                self.engine.cancel(station.in_service.pop(pax.id))
                self._close_visit(pax, now)
                self._record(station)
                touched[station.id] = station
        for pax in left:
            pax.missed_stage = pax.stage
            pax.stage = Stage.MissedFlight
            pax.timestamps["exit"] = now
            self._leave_terminal(pax)
        for station in touched.values():
            self._try_start(station)

    def _close_visit(self, pax: Passenger, now: float) -> None:
        visit = self.open_visits.pop(pax.id)
        visit.end = now
        self.visits.append(visit)

    def _leave_terminal(self, pax: Passenger) -> None:
        self.present.pop(pax.id, None)
        self.spot.pop(pax.id, None)

    # -------------------------------------------------------------- sampling

    def position_of(self, pid: int) -> tuple[float, float]:
        walk = self.walking.get(pid)
        if walk is not None:
            return position_at(walk.path, walk.speed, walk.depart, self.engine.clock)
        return self.spot[pid]

    def _on_density_sample(self, event) -> None:
        grid = self.density
        for pid in self.present:
            x, y = self.position_of(pid)
            grid.add(x, y)
        grid.samples += 1

    def _on_queue_sample(self, event) -> None:
        now = self.engine.clock
        for sid in self.queue_series.station_ids:
            self.queue_series.record(now, sid, self.stations[sid].load, tick=True)


def _kind_of(stage: Stage) -> str:
    for kind, stages in _QUEUE_STAGE.items():
        if stage in stages:
            return kind
    raise IllegalTransition(f"{stage} is not a station stage")


def single_station_run(rate_per_hour: float, keep_fraction: float, service: TriangularParams,
                       hours: float, seed: int = 0, servers: int = 1):
    """Drive one FIFO station with a thinned Poisson stream.

    Returns ``(series, visits, span_end)``; used as a queueing sanity oracle.
    """
    engine = Engine()
    arrivals = derive_stream(seed, 0, "oracle.arrivals")
    thinning = derive_stream(seed, 0, "oracle.thinning")
    services = derive_stream(seed, 0, "oracle.service")
    station = ServiceStation("desk", "checkin", servers, service.in_seconds(), "desk")
    series = QueueSeries([station.id])
    visits: dict[int, Visit] = {}
    done: list[Visit] = []
    end = hours * 3600.0

    t = 0.0
    pid = 0
    mean_gap = 3600.0 / rate_per_hour
    while True:
        t += arrivals.exponential(mean_gap)
        if t > end:
            break
        if thinning.random() < keep_fraction:
            pid += 1
            engine.schedule(t, EventKind.PassengerArrival, pid)

    def start(p: int) -> None:
        visits[p].start = engine.clock
        eid = engine.schedule(engine.clock + sample_triangular(station.service_dist, services),
                              EventKind.ServiceComplete, p)
        station.in_service[p] = eid

    def on_arrival(ev) -> None:
        visits[ev.payload] = Visit(ev.payload, station.id, engine.clock)
        station.queue.append(ev.payload)
        series.record(engine.clock, station.id, station.load)
        if station.busy_servers < station.server_count:
            start(station.queue.popleft())

    def on_complete(ev) -> None:
        del station.in_service[ev.payload]
        visit = visits.pop(ev.payload)
        visit.end = engine.clock
        visit.completed = True
        done.append(visit)
        series.record(engine.clock, station.id, station.load)
        if station.queue:
            start(station.queue.popleft())

    engine.on(EventKind.PassengerArrival, on_arrival)
    engine.on(EventKind.ServiceComplete, on_complete)
    engine.run_until(float("inf"))
    series.close(engine.clock)
    return series, done, engine.clock
