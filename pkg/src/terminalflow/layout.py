"""Terminal floor plan as a waypoint graph.

Layout files are JSON with the top-level keys ``nodes``, ``edges``,
``zones``, ``stations``, ``entrance`` and ``gate``. Coordinates are metres,
y pointing north, origin at the south-west corner of the terminal.
"""

from __future__ import annotations

import bisect
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

WAITING_ZONE = "hall"
_EPS = 1e-9


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class Unreachable(LookupError):
    pass


class InvalidSpeed(ValueError):
    pass


class OutOfWindow(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class Zone:
    id: str
    anchor_node: str
    cell_points: tuple[tuple[float, float], ...]


@dataclass
class Layout:
    nodes: dict[str, Node]
    adjacency: dict[str, dict[str, float]]
    zones: dict[str, Zone]
    station_placements: dict[str, str]
    entrance_node: str
    gate_node: str
    _path_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def coords(self, node_id: str) -> tuple[float, float]:
        n = self.nodes[node_id]
        return n.x, n.y

    def bounding_box(self) -> tuple[float, float]:
        xs = [n.x for n in self.nodes.values()]
        ys = [n.y for n in self.nodes.values()]
        for zone in self.zones.values():
            xs.extend(p[0] for p in zone.cell_points)
            ys.extend(p[1] for p in zone.cell_points)
        return max(xs), max(ys)

    @property
    def waiting_zone(self) -> Zone:
        return self.zones[WAITING_ZONE]

    def path(self, a: str, b: str) -> "Path":
        key = (a, b)
        cached = self._path_cache.get(key)
        if cached is None:
            cached = self._path_cache[key] = shortest_path(self, a, b)
        return cached


@dataclass(frozen=True)
class Path:
    node_sequence: tuple[str, ...]
    total_length_m: float
    points: tuple[tuple[float, float], ...]
    cumulative_m: tuple[float, ...]


def _euclid(p: Node, q: Node) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def load_layout(file) -> Layout:
    try:
        raw = json.loads(FsPath(file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{file}: {exc}") from exc
    return layout_from_dict(raw)


def layout_from_dict(raw: dict) -> Layout:
    try:
        nodes: dict[str, Node] = {}
        for item in raw["nodes"]:
            node = Node(str(item["id"]), float(item["x"]), float(item["y"]))
            if node.id in nodes:
                raise ValidationError(f"nodes: duplicate node id {node.id!r}")
            nodes[node.id] = node
        edges = [(str(e["from"]), str(e["to"]), e.get("length_m")) for e in raw["edges"]]
        zones_raw = raw.get("zones", [])
        stations = {str(k): str(v) for k, v in raw.get("stations", {}).items()}
        entrance = raw.get("entrance")
        gate = raw.get("gate")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed layout: {exc!r}") from exc

    if entrance is None or entrance not in nodes:
        raise ValidationError(f"entrance: node {entrance!r} is missing")
    if gate is None or gate not in nodes:
        raise ValidationError(f"gate: node {gate!r} is missing")

    adjacency: dict[str, dict[str, float]] = {nid: {} for nid in nodes}
    for i, (a, b, length) in enumerate(edges):
        if a not in nodes or b not in nodes:
            raise ValidationError(f"edges[{i}]: unknown endpoint in {a!r}-{b!r}")
        direct = _euclid(nodes[a], nodes[b])
        if length is None:
            length = direct
        length = float(length)
        if length <= 0:
            raise ValidationError(f"edges[{i}]: length must be > 0 ({a!r}-{b!r})")
        if length < direct - _EPS:
            raise ValidationError(
                f"edges[{i}]: length {length} shorter than straight-line distance {direct:.4f}"
            )
        adjacency[a][b] = length
        adjacency[b][a] = length

    zones: dict[str, Zone] = {}
    for i, z in enumerate(zones_raw):
        points = tuple((float(p[0]), float(p[1])) for p in z["cell_points"])
        if len(set(points)) != len(points):
            raise ValidationError(f"zones[{i}]: duplicate cell point")
        if not points:
            raise ValidationError(f"zones[{i}]: no cell points")
        if z["anchor_node"] not in nodes:
            raise ValidationError(f"zones[{i}]: unknown anchor node {z['anchor_node']!r}")
        zones[str(z["id"])] = Zone(str(z["id"]), str(z["anchor_node"]), points)
    if WAITING_ZONE not in zones:
        raise ValidationError(f"zones: a waiting zone with id {WAITING_ZONE!r} is required")

    for sid, nid in stations.items():
        if nid not in nodes:
            raise ValidationError(f"stations.{sid}: unknown node {nid!r}")

    reachable = _reachable(adjacency, entrance)
    targets = {gate, *stations.values(), *(z.anchor_node for z in zones.values())}
    for nid in sorted(targets):
        if nid not in reachable:
            raise ValidationError(f"node {nid!r} is disconnected from the entrance")

    return Layout(nodes, adjacency, zones, stations, entrance, gate)


def _reachable(adjacency: dict[str, dict[str, float]], start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adjacency[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def _make_path(layout: Layout, seq: tuple[str, ...], length: float) -> Path:
    points = tuple(layout.coords(n) for n in seq)
    cumulative = [0.0]
    for a, b in zip(seq, seq[1:]):
        cumulative.append(cumulative[-1] + layout.adjacency[a][b])
    return Path(seq, length, points, tuple(cumulative))


def shortest_path(layout: Layout, from_node: str, to_node: str) -> Path:
    """Dijkstra; equal-length routes resolve to the lexicographically smallest node sequence."""
    for nid in (from_node, to_node):
        if nid not in layout.nodes:
            raise KeyError(f"unknown node {nid!r}")
    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (from_node,))]
    best: dict[str, float] = {from_node: 0.0}
    done: set[str] = set()
    while heap:
        dist, seq = heapq.heappop(heap)
        node = seq[-1]
        if node in done:
            continue
        done.add(node)
        if node == to_node:
            return _make_path(layout, seq, dist)
        for nxt, w in layout.adjacency[node].items():
            if nxt in done:
                continue
            nd = dist + w
            if nd <= best.get(nxt, math.inf):
                best[nxt] = nd
                heapq.heappush(heap, (nd, seq + (nxt,)))
    raise Unreachable(f"no path from {from_node!r} to {to_node!r}")


def travel_time(path: Path, speed: float) -> float:
    if speed <= 0:
        raise InvalidSpeed(f"speed must be positive, got {speed}")
    return path.total_length_m / speed


def position_at(path: Path, speed: float, depart_time: float, query_time: float) -> tuple[float, float]:
    arrive = depart_time + travel_time(path, speed)
    if query_time < depart_time - _EPS or query_time > arrive + _EPS:
        raise OutOfWindow(f"t={query_time} outside walk window [{depart_time}, {arrive}]")
    dist = min(max(speed * (query_time - depart_time), 0.0), path.total_length_m)
    cum = path.cumulative_m
    if len(cum) == 1:
        return path.points[0]
    i = bisect.bisect_right(cum, dist) - 1
    if i >= len(cum) - 1:
        return path.points[-1]
    seg = cum[i + 1] - cum[i]
    frac = (dist - cum[i]) / seg
    (x0, y0), (x1, y1) = path.points[i], path.points[i + 1]
    return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
