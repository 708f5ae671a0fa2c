"""Discrete-event kernel: clock, future-event list and run loop.

Events are totally ordered by ``(time, seq)``. ``seq`` is handed out at
scheduling time, so two events at the same instant fire in the order they
were scheduled.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

HORIZON_END = 43200.0  # 12 h of operation, 06:00 -> 18:00
OPEN_HOUR = 6


class SchedulingInPast(RuntimeError):
    pass


class EventKind(enum.Enum):
    PassengerArrival = "PassengerArrival"
    WalkComplete = "WalkComplete"
    ServiceComplete = "ServiceComplete"
    BoardingStart = "BoardingStart"
    FlightDeparture = "FlightDeparture"
    DensitySample = "DensitySample"
    QueueSample = "QueueSample"


@dataclass(frozen=True, order=True)
class Event:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)


def to_clock(seconds_since_open: float, open_hour: int = OPEN_HOUR) -> str:
    """Render simulation seconds as wall-clock ``HH:MM`` (floor to the minute)."""
    minutes = int(seconds_since_open // 60) + open_hour * 60
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def from_clock(hhmm: str, open_hour: int = OPEN_HOUR) -> float:
    hours, minutes = hhmm.strip().split(":")
    return float((int(hours) - open_hour) * 3600 + int(minutes) * 60)


class EventQueue:
    """Binary-heap future-event list with lazy cancellation."""

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._cancelled: set[int] = set()
        self._next_seq = 0
        self.clock = 0.0

    def __len__(self) -> int:
        return len(self._heap) - len(self._cancelled)

    def schedule(self, time: float, kind: EventKind, payload: Any = None) -> int:
        if time < self.clock:
            raise SchedulingInPast(
                f"cannot schedule {kind.value} at t={time!r} (clock={self.clock!r})"
            )
        seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, Event(float(time), seq, kind, payload))
        return seq

    def cancel(self, event_id: int) -> None:
        self._cancelled.add(event_id)

    def _drop_cancelled(self) -> None:
        heap = self._heap
        while heap and heap[0].seq in self._cancelled:
            self._cancelled.discard(heapq.heappop(heap).seq)

    def peek_time(self) -> float | None:
        self._drop_cancelled()
        return self._heap[0].time if self._heap else None

    def pop_next(self) -> Event | None:
        self._drop_cancelled()
        if not self._heap:
            return None
        event = heapq.heappop(self._heap)
        self.clock = event.time
        return event


@dataclass
class RunSummary:
    events_processed: int
    final_clock: float


class Engine:
    """Dispatches events to per-kind handlers until a time bound."""

    def __init__(self, log_events: bool = False) -> None:
        self.queue = EventQueue()
        self.handlers: dict[EventKind, Callable[[Event], None]] = {}
        self.log: list[Event] | None = [] if log_events else None

    @property
    def clock(self) -> float:
        return self.queue.clock

    def on(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self.handlers[kind] = handler

    def schedule(self, time: float, kind: EventKind, payload: Any = None) -> int:
        return self.queue.schedule(time, kind, payload)

    def cancel(self, event_id: int) -> None:
        self.queue.cancel(event_id)

    def run_until(self, end: float) -> RunSummary:
        if end < self.clock:
            raise ValueError(f"end={end} is before the clock ({self.clock})")
        queue = self.queue
        handlers = self.handlers
        log = self.log
        processed = 0
        while True:
            next_time = queue.peek_time()
            if next_time is None or next_time > end:
                break
            event = queue.pop_next()
            if log is not None:
                log.append(event)
            handler = handlers.get(event.kind)
            if handler is not None:
                handler(event)
            processed += 1
        return RunSummary(processed, self.clock)
