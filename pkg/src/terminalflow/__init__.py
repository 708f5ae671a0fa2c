"""Discrete-event simulation of departing-passenger flow through a small airport terminal."""

from importlib import resources
from pathlib import Path

from .config import RunPlan, ScenarioConfig, parse_config
from .engine import Engine, EventKind, EventQueue
from .flow import Simulation
from .runner import run_replications, simulate

__all__ = ["Engine", "EventKind", "EventQueue", "RunPlan", "ScenarioConfig", "Simulation",
           "data_path", "parse_config", "run_replications", "simulate"]

__version__ = "0.1.0"


def data_path(*parts: str) -> Path:
    """Path to a bundled fixture, e.g. ``data_path("scenario1.json")``."""
    return Path(str(resources.files(__name__).joinpath("data", *parts)))
