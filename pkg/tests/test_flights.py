import dataclasses
import math

import pytest

from conftest import load_plan
from terminalflow import data_path
from terminalflow.engine import from_clock
from terminalflow.flights import (
    Airline,
    Nationality,
    OutOfHorizon,
    ParseError,
    Streams,
    bookings_per_flight,
    generate_passengers,
    load_flights,
    plan_boarding,
)

HEADER = "destination,airline,departure\n"


def one_flight(tmp_path, row):
    f = tmp_path / "flights.csv"
    f.write_text(HEADER + row + "\n", encoding="utf-8")
    return load_flights(f)


def test_mitu_row(tmp_path):
    (f,) = one_flight(tmp_path, "Mitú,Satena,2016-01-23T06:30")
    assert (f.destination, f.airline, f.departure) == ("Mitú", Airline.Satena, 1800)


def test_bogota_afternoon_row(tmp_path):
    (f,) = one_flight(tmp_path, "Bogotá,Avianca,2016-01-23T16:30")
    assert f.departure == 37800


def test_departure_after_close(tmp_path):
    with pytest.raises(OutOfHorizon):
        one_flight(tmp_path, "Bogotá,Avianca,2016-01-23T19:00")


def test_bad_header_and_airline(tmp_path):
    f = tmp_path / "flights.csv"
    f.write_text("dest,airline,dep\nX,Satena,2016-01-23T08:00\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_flights(f)
    with pytest.raises(ParseError):
        one_flight(tmp_path, "X,Lufthansa,2016-01-23T08:00")


def test_bundled_schedule_is_sorted():
    flights = load_flights(data_path("flights.csv"))
    assert [f.id for f in flights] == [f"F{i}" for i in range(1, 7)]
    assert [f.departure for f in flights] == sorted(f.departure for f in flights)
    assert [f.airline.value for f in flights].count("Avianca") == 2


@pytest.mark.parametrize("dep,lead,expected", [("16:30", 40, "15:50"), ("06:30", 40, "06:00"),
                                               ("07:00", 40, "06:20")])
def test_plan_boarding(tmp_path, dep, lead, expected):
    (f,) = one_flight(tmp_path, f"X,Avianca,2016-01-23T{dep}")
    planned = plan_boarding(f, lead, 0.0)
    assert planned.boarding_start == from_clock(expected)
    assert f.boarding_start is None


@pytest.mark.parametrize("rate,per_flight", [(25, 50), (50, 100)])
def test_bookings_rule(rate, per_flight):
    assert bookings_per_flight(rate, 12, 6) == per_flight


def _generate(plan, rep=0, **overrides):
    sc = dataclasses.replace(plan.scenario, **overrides)
    streams = Streams(sc.seed, rep)
    out = []
    for f in plan.flights:
        f = plan_boarding(f, sc.boarding_lead_min, 0.0)
        out.append((f, generate_passengers(f, sc, streams, len(out) + 1, len(plan.flights))))
    return out


def test_generated_counts_and_arrival_window():
    plan = load_plan("scenario1")
    total = 0
    for f, pax in _generate(plan):
        assert len(pax) == 50
        assert f.booked == [p.id for p in pax]
        for p in pax:
            assert 0 <= p.arrival < f.departure
            assert p.flight_id == f.id
        total += len(pax)
    assert total == 300


def test_scenario3_doubles_demand():
    plan = load_plan("scenario3")
    assert all(len(pax) == 100 for _, pax in _generate(plan))


def test_no_foreigners_at_zero_fraction():
    plan = load_plan("scenario1")
    pax = [p for _, ps in _generate(plan, foreign_fraction=0.0) for p in ps]
    assert all(p.nationality is Nationality.Colombian for p in pax)


@pytest.mark.parametrize("fraction", [0.1, 0.3, 0.5])
def test_foreign_count_within_four_sigma(fraction):
    plan = load_plan("scenario3")
    for rep in range(5):
        pax = [p for _, ps in _generate(plan, rep, foreign_fraction=fraction) for p in ps]
        n = len(pax)
        foreign = sum(p.nationality is Nationality.Foreign for p in pax)
        assert abs(foreign - n * fraction) <= 4 * math.sqrt(n * fraction * (1 - fraction))


def test_foreign_sets_are_nested_across_fractions():
    plan = load_plan("scenario4")
    def foreign_ids(x):
        return {p.id for _, ps in _generate(plan, foreign_fraction=x) for p in ps if p.foreign}
    assert foreign_ids(0.1) <= foreign_ids(0.3) <= foreign_ids(0.5)


def test_booking_override():
    plan = load_plan("scenario1")
    gen = _generate(plan, bookings={"F3": 7})
    assert [len(p) for _, p in gen] == [50, 50, 7, 50, 50, 50]
