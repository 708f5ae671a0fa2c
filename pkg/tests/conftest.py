import pytest

from terminalflow import data_path, parse_config
from terminalflow.runner import simulate

SCENARIOS = ("scenario1", "scenario2", "scenario3", "scenario4")


def load_plan(name: str):
    if name == "degenerate":
        return parse_config(data_path("degenerate", "scenario.json"),
                            data_path("degenerate", "flights.csv"), data_path("layout.json"))
    return parse_config(data_path(f"{name}.json"), data_path("flights.csv"), data_path("layout.json"))


@pytest.fixture(scope="session")
def degenerate_plan():
    return load_plan("degenerate")


@pytest.fixture(scope="session")
def degenerate_sim(degenerate_plan):
    return simulate(degenerate_plan, 0, log_events=True)


@pytest.fixture(scope="session")
def layout():
    return load_plan("scenario1").layout


@pytest.fixture(scope="session")
def scenario_sims():
    """All 20 replications of every bundled scenario, density sampling off."""
    out = {}
    for name in SCENARIOS:
        plan = load_plan(name)
        out[name] = [simulate(plan, k, collect_density=False)
                     for k in range(plan.scenario.replications)]
    return out


def simulate_args(name: str, out, *extra: str) -> list[str]:
    if name == "degenerate":
        scenario, flights = data_path("degenerate", "scenario.json"), data_path("degenerate", "flights.csv")
    else:
        scenario, flights = data_path(f"{name}.json"), data_path("flights.csv")
    return ["simulate", "--scenario", str(scenario), "--flights", str(flights),
            "--layout", str(data_path("layout.json")), "--out", str(out), *extra]


@pytest.fixture(scope="session")
def scenario_runs(tmp_path_factory):
    """Run directories produced by the CLI for every bundled scenario (20 replications each)."""
    from terminalflow.cli import main

    root = tmp_path_factory.mktemp("runs")
    out = {}
    for name in SCENARIOS:
        assert main(simulate_args(name, root / name)) == 0
        out[name] = root / name
    return out


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(criterion: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
