"""Seeded random streams and the samplers used by the terminal model.

Stream derivation
-----------------
Every stream is a PCG64 generator seeded from a ``numpy.random.SeedSequence``
with ``entropy=master_seed`` and ``spawn_key=(replication_index, label_key)``,
where ``label_key`` is the first 8 bytes (big-endian) of the SHA-256 digest of
the UTF-8 stream label. The same triple always yields the same sequence, and
adding a new label never perturbs an existing stream.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

RngStream = np.random.Generator

MAX_REDRAWS = 1000


class InvalidParams(ValueError):
    pass


class DegenerateBounds(RuntimeError):
    pass


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")


def derive_stream(master_seed: int, replication_index: int, stream_label: str) -> RngStream:
    seq = np.random.SeedSequence(
        entropy=int(master_seed),
        spawn_key=(int(replication_index), _label_key(stream_label)),
    )
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class TriangularParams:
    """Triangular distribution; ``a == c == b`` is accepted as a point mass."""

    min_a: float
    mode_c: float
    max_b: float
    unit: str = "s"

    def __post_init__(self) -> None:
        if not (self.min_a <= self.mode_c <= self.max_b):
            raise InvalidParams(
                f"triangular needs min <= mode <= max, got "
                f"({self.min_a}, {self.mode_c}, {self.max_b})"
            )
        if self.unit not in _UNIT_SECONDS:
            raise InvalidParams(f"unknown unit {self.unit!r}")

    @property
    def mean(self) -> float:
        return (self.min_a + self.mode_c + self.max_b) / 3.0

    def in_seconds(self) -> "TriangularParams":
        k = _UNIT_SECONDS[self.unit]
        return TriangularParams(self.min_a * k, self.mode_c * k, self.max_b * k, "s")

    @classmethod
    def from_config(cls, cfg: dict) -> "TriangularParams":
        if cfg.get("type", "triangular") != "triangular":
            raise InvalidParams(f"unsupported distribution type {cfg.get('type')!r}")
        return cls(float(cfg["min"]), float(cfg["mode"]), float(cfg["max"]),
                   cfg.get("unit", "s"))


_UNIT_SECONDS = {"s": 1.0, "min": 60.0, "h": 3600.0}


def triangular_ppf(params: TriangularParams, u):
    """Inverse CDF; works on scalars and numpy arrays."""
    a, c, b = params.min_a, params.mode_c, params.max_b
    width = b - a
    if width == 0.0:
        return a if np.isscalar(u) else np.full(np.shape(u), a)
    split = (c - a) / width
    if np.isscalar(u):
        if u <= split:
            return a + math.sqrt(u * width * (c - a))
        return b - math.sqrt((1.0 - u) * width * (b - c))
    u = np.asarray(u, dtype=float)
    left = a + np.sqrt(u * width * (c - a))
    right = b - np.sqrt((1.0 - u) * width * (b - c))
    return np.where(u <= split, left, right)


def sample_triangular(params: TriangularParams, stream: RngStream, size: int | None = None):
    if size is None:
        return triangular_ppf(params, stream.random())
    return triangular_ppf(params, stream.random(size))


@dataclass(frozen=True)
class SpeedDistribution:
    """Normal walking speed truncated to ``[lo, hi]`` by rejection (m/s)."""

    mu: float = 0.75167
    sigma: float = 0.13674
    lo: float = 0.61493
    hi: float = 0.88841

    def __post_init__(self) -> None:
        if not (self.lo < self.mu < self.hi) or self.sigma <= 0:
            raise InvalidParams(f"invalid speed distribution {self}")

    @classmethod
    def from_config(cls, cfg: dict) -> "SpeedDistribution | ConstantSpeed":
        kind = cfg.get("type", "truncated_normal")
        if kind == "constant":
            return ConstantSpeed(float(cfg["value"]))
        if kind != "truncated_normal":
            raise InvalidParams(f"unsupported walk speed type {kind!r}")
        return cls(float(cfg["mean"]), float(cfg["sd"]), float(cfg["min"]), float(cfg["max"]))


@dataclass(frozen=True)
class ConstantSpeed:
    value: float

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise InvalidParams("walking speed must be positive")

    @property
    def hi(self) -> float:
        return self.value


def sample_walking_speed(dist, stream: RngStream, size: int | None = None):
    if isinstance(dist, ConstantSpeed):
        return dist.value if size is None else np.full(size, dist.value)
    if size is None:
        for _ in range(MAX_REDRAWS):
            s = stream.normal(dist.mu, dist.sigma)
            if dist.lo <= s <= dist.hi:
                return float(s)
        raise DegenerateBounds(f"no draw inside [{dist.lo}, {dist.hi}] after {MAX_REDRAWS} tries")
    out = np.empty(size)
    filled = 0
    for _ in range(MAX_REDRAWS):
        draw = stream.normal(dist.mu, dist.sigma, size - filled)
        keep = draw[(draw >= dist.lo) & (draw <= dist.hi)]
        out[filled:filled + keep.size] = keep
        filled += keep.size
        if filled == size:
            return out
    raise DegenerateBounds(f"could not fill {size} draws inside [{dist.lo}, {dist.hi}]")
