import json
from collections import defaultdict

import pytest

import golden
from terminalflow import data_path, flow
from terminalflow.config import parse_config
from terminalflow.flights import Nationality, Stage
from terminalflow.flow import (
    EmptyCandidates,
    NoFreeServer,
    ServiceStation,
    Simulation,
    select_queue,
)
from terminalflow.observability import Visit
from terminalflow.runner import simulate
from terminalflow.stochastics import TriangularParams

CONST = TriangularParams(60, 60, 60, "s")
PIPELINE = ["enter", "checkin_join", "checkin_start", "checkin_end", "police_join", "police_start",
            "police_end", "hall_enter", "hall_leave", "security_join", "security_start",
            "security_end", "gate_join", "gate_start", "gate_end", "board"]


def stations_with_loads(loads):
    out = []
    for i, n in enumerate(loads):
        st = ServiceStation(f"desk_{i}", "checkin", 1, CONST, "checkin")
        if n:
            st.in_service[1000 + i] = 0
        st.queue.extend(range(max(n - 1, 0)))
        out.append(st)
    return out


@pytest.mark.parametrize("loads,index", [([2, 0], 1), ([3, 1, 2], 1), ([2, 2], 0), ([5], 0)])
def test_select_queue(loads, index):
    stations = stations_with_loads(loads)
    assert select_queue(stations) is stations[index]


def test_select_queue_counts_committed_walkers():
    a, b = stations_with_loads([0, 0])
    a.inbound = 1
    assert select_queue([a, b]) is b


def test_select_queue_empty():
    with pytest.raises(EmptyCandidates):
        select_queue([])


def degenerate_variant(tmp_path, **changes):
    raw = json.loads(data_path("degenerate", "scenario.json").read_text(encoding="utf-8"))
    service = changes.pop("service", {})
    raw.update(changes)
    raw["service"].update(service)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return parse_config(path, data_path("degenerate", "flights.csv"), data_path("layout.json"))


def fresh_sim(plan):
    return Simulation(plan.scenario, plan.flights, plan.layout)


def test_constant_service_completes_after_sixty_seconds(degenerate_plan):
    sim = fresh_sim(degenerate_plan)
    sim.engine.queue.clock = 100.0
    desk = sim.stations["checkin_avianca_1"]
    pax = sim.passengers[1]
    sim.open_visits[pax.id] = Visit(pax.id, desk.id, 100.0)
    sim.start_service(desk, pax)
    pending = [e for e in sim.engine.queue._heap if e.seq == desk.in_service[pax.id]]
    assert pending[0].time == 160.0
    assert pax.stage is Stage.InCheckInService


def test_no_free_server(degenerate_plan):
    sim = fresh_sim(degenerate_plan)
    desk = sim.stations["checkin_avianca_1"]
    desk.in_service[99] = 0
    with pytest.raises(NoFreeServer):
        sim.start_service(desk, sim.passengers[1])


def test_default_service_bounds(degenerate_plan):
    from terminalflow.config import DEFAULT_SERVICE
    from terminalflow.stochastics import triangular_ppf
    checkin = TriangularParams.from_config(DEFAULT_SERVICE["checkin"]).in_seconds()
    security = TriangularParams.from_config(DEFAULT_SERVICE["security"]).in_seconds()
    for u in (0.0, 0.3, 0.999999, 1.0):
        assert 30 <= triangular_ppf(checkin, u) <= 90
        assert triangular_ppf(security, u) <= 300


@pytest.mark.parametrize("nationality,kind,expected", [
    (Nationality.Colombian, "checkin", Stage.ToHall),
    (Nationality.Foreign, "checkin", Stage.ToPolice),
    (Nationality.Colombian, "security", Stage.ToGate),
    (Nationality.Foreign, "police", Stage.ToHall),
])
def test_advance_stage(degenerate_plan, nationality, kind, expected):
    sim = fresh_sim(degenerate_plan)
    pax = sim.passengers[1]
    pax.nationality = nationality
    station = {"checkin": sim.stations["checkin_avianca_1"], "police": sim.police,
               "security": sim.security[0]}[kind]
    assert sim.advance_stage(pax, station) is expected


def test_degenerate_trace_timestamps(degenerate_sim):
    for pid, expected in golden.TIMESTAMPS.items():
        pax = degenerate_sim.passengers[pid]
        assert pax.stage is Stage.Boarded
        for key, value in expected.items():
            assert golden.matches(pax.timestamps[key], value), (pid, key)
        for kind, sid in golden.STATIONS[pid].items():
            assert pax.stations[kind] == sid


def test_work_conserving_handoff(degenerate_sim):
    p = degenerate_sim.passengers
    assert p[2].timestamps["gate_start"] == p[1].timestamps["gate_end"]
    assert p[3].timestamps["security_start"] == p[1].timestamps["security_end"]


def test_arrival_at_open_has_zero_entry_time(degenerate_sim):
    assert degenerate_sim.passengers[1].timestamps["enter"] == 0.0


def test_boarding_release_balances_security(tmp_path):
    passengers = [{"flight": "F1", "arrival": f"06:{m:02d}"} for m in range(10)]
    plan = degenerate_variant(tmp_path, passengers=passengers)
    sim = simulate(plan, 0)
    counts = defaultdict(int)
    for p in sim.passengers.values():
        assert p.timestamps["hall_leave"] == 1200.0
        counts[p.stations["security"]] += 1
    assert counts == {"security_1": 5, "security_2": 5}


def test_boarding_start_with_empty_hall(degenerate_plan):
    sim = fresh_sim(degenerate_plan)
    flight = sim.flights["F1"]
    sim.start_boarding(flight)
    assert flight.boarding_open and len(sim.engine.queue) > 0
    assert all(p.stage is Stage.PreArrival for p in sim.passengers.values())


def test_late_foreigner_skips_the_hall_wait(tmp_path):
    plan = degenerate_variant(tmp_path, passengers=[
        {"flight": "F1", "arrival": "06:25", "nationality": "Foreign"}])
    pax = simulate(plan, 0).passengers[1]
    assert pax.stage is Stage.Boarded
    assert pax.timestamps["police_end"] <= pax.timestamps["hall_enter"] == pax.timestamps["hall_leave"]
    assert pax.timestamps["hall_leave"] > 1200


def test_departure_removes_unboarded(tmp_path):
    plan = degenerate_variant(tmp_path, security_points=1,
                              service={"security": {"type": "triangular", "min": 1500,
                                                    "mode": 1500, "max": 1500, "unit": "s"}})
    sim = simulate(plan, 0)
    p = sim.passengers
    assert p[1].stage is Stage.Boarded
    assert (p[2].stage, p[2].missed_stage) == (Stage.MissedFlight, Stage.InSecurityService)
    assert (p[3].stage, p[3].missed_stage) == (Stage.MissedFlight, Stage.InSecurityQueue)
    assert p[2].timestamps["exit"] == p[3].timestamps["exit"] == 3600.0
    assert sim.flights["F1"].gate_closed
    assert sim.stations["security_1"].load == 0
    assert not sim.present
    assert all(v.join <= 3600.0 for v in sim.visits)


def test_runs_with_debug_log_are_ordered(degenerate_sim):
    log = degenerate_sim.engine.log
    assert [(e.time, e.seq) for e in log] == sorted((e.time, e.seq) for e in log)


def test_shortest_queue_at_every_join(monkeypatch):
    from conftest import load_plan
    decisions = []
    original = flow.select_queue

    def recording(stations):
        chosen = original(stations)
        loads = [(len(s.queue) + len(s.in_service) + s.inbound, s.id) for s in stations]
        decisions.append((min(loads), (chosen.selection_load, chosen.id)))
        return chosen

    monkeypatch.setattr(flow, "select_queue", recording)
    simulate(load_plan("scenario1"), 0, collect_density=False)
    assert len(decisions) > 300
    assert all(best == chosen for best, chosen in decisions)


# ----------------------------------------------------------------- properties

def all_sims(scenario_sims):
    for name, sims in scenario_sims.items():
        for k, sim in enumerate(sims):
            yield f"{name}/rep_{k}", sim


def test_conservation(scenario_sims):
    for tag, sim in all_sims(scenario_sims):
        stages = [p.stage for p in sim.passengers.values()]
        boarded = stages.count(Stage.Boarded)
        missed = stages.count(Stage.MissedFlight)
        assert len(stages) == boarded + missed, tag
        assert len(stages) == sum(len(f.booked) for f in sim.flights.values())


def test_timestamp_monotonicity_and_routes(scenario_sims):
    for tag, sim in all_sims(scenario_sims):
        for p in sim.passengers.values():
            seq = [p.timestamps[k] for k in PIPELINE if k in p.timestamps]
            assert seq == sorted(seq), (tag, p.id)
            if p.foreign:
                if "security_join" in p.timestamps:
                    assert p.timestamps["police_end"] <= p.timestamps["security_join"]
            else:
                assert not any(k.startswith("police") for k in p.timestamps)
            if p.stage is Stage.Boarded:
                f = sim.flights[p.flight_id]
                assert f.boarding_start <= p.timestamps["board"] <= f.departure
                assert all(k in p.timestamps for k in ("checkin_end", "security_end", "gate_end"))


def test_satena_passengers_use_satena_desks(scenario_sims):
    sim = scenario_sims["scenario1"][0]
    for p in sim.passengers.values():
        if "checkin_join" in p.timestamps:
            airline = sim.flights[p.flight_id].airline.key
            assert p.stations["checkin"].startswith(f"checkin_{airline}_")


def test_fifo_and_capacity(scenario_sims):
    for tag, sim in all_sims(scenario_sims):
        by_station = defaultdict(list)
        for v in sim.visits:
            by_station[v.station_id].append(v)
        for sid, visits in by_station.items():
            started = sorted((v for v in visits if v.start is not None), key=lambda v: v.start)
            joins = [v.join for v in started]
            assert joins == sorted(joins), (tag, sid)
            edges = sorted([(v.start, 1) for v in started] + [(v.end, -1) for v in started],
                           key=lambda e: (e[0], e[1]))
            busy = 0
            for _, delta in edges:
                busy += delta
                assert 0 <= busy <= sim.stations[sid].server_count, (tag, sid)
