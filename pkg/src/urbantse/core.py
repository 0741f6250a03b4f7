"""Domain types shared by every stage of the toolkit.

Timestamps are real-valued seconds from scenario start. Series values are
stored as read-only float arrays in which NaN marks a MISSING sample; use
:func:`is_missing` rather than comparing against :data:`MISSING`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

MISSING = math.nan

# timestamps are kept at millisecond resolution
TIME_DECIMALS = 3


def is_missing(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


class Approach(str, Enum):
    WB = "WB"
    EB = "EB"
    NB = "NB"


class Unit(str, Enum):
    VEH_PER_H = "veh_per_h"
    SECONDS = "seconds"
    DIMENSIONLESS = "dimensionless"


class SensorKind(str, Enum):
    COUNT_ONLY = "count_only"
    PLATE = "plate"
    MAC = "mac"


@dataclass(frozen=True)
class IntervalGrid:
    """Uniform measurement grid; interval ``i`` covers ``[start + i*T, start + (i+1)*T)``."""

    start: float = 0.0
    horizon: float = 7200.0
    T: float = 60.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"interval length T must be positive, got {self.T}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        ratio = self.horizon / self.T
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"horizon {self.horizon} is not a multiple of T={self.T}")

    @property
    def n(self) -> int:
        return int(round(self.horizon / self.T))

    @property
    def end(self) -> float:
        return self.start + self.horizon

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end

    def interval_of(self, t: float) -> int:
        return interval_of(self, t)

    def interval_start(self, i: int) -> float:
        return self.start + i * self.T


def interval_of(grid: IntervalGrid, t: float) -> int:
    """Index of the interval containing timestamp ``t``.

    Raises
    ------
    IndexError
        If ``t`` lies outside ``[start, start + horizon)``.
    """
    if not grid.contains(t):
        raise IndexError(f"timestamp {t} outside horizon [{grid.start}, {grid.end})")
    i = int(math.floor((t - grid.start) / grid.T))
    # guard against float rounding just below an interval edge
    return min(i, grid.n - 1)


def bin_counts(grid: IntervalGrid, times: Iterable[float]) -> np.ndarray:
    """Per-interval event counts; events outside the horizon are ignored."""
    counts = np.zeros(grid.n, dtype=np.int64)
    for t in times:
        if grid.contains(t):
            counts[interval_of(grid, t)] += 1
    return counts


@dataclass(frozen=True)
class Spot:
    id: int
    approach: Approach
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "approach", Approach(self.approach))


@dataclass(frozen=True)
class Route:
    id: int
    entry_spot: int
    exit_spot: int
    free_flow_time: float

    def __post_init__(self):
        if self.entry_spot == self.exit_spot:
            raise ValueError(f"route {self.id}: entry and exit spot are both {self.entry_spot}")
        if not self.free_flow_time > 0:
            raise ValueError(f"route {self.id}: free_flow_time must be positive")


@dataclass(frozen=True)
class VehicleTrace:
    vehicle_id: str
    route_id: int
    t_in: float
    t_out: float

    def __post_init__(self):
        if not self.t_out >= self.t_in:
            raise ValueError(
                f"vehicle {self.vehicle_id}: t_out {self.t_out} precedes t_in {self.t_in}"
            )

    @property
    def travel_time(self) -> float:
        return self.t_out - self.t_in


def check_traces(traces: Iterable[VehicleTrace], routes: Sequence[Route], tol: float = 1e-6):
    """Raise ValueError if a trace is faster than its route's free-flow time."""
    fft = {r.id: r.free_flow_time for r in routes}
    for tr in traces:
        if tr.route_id not in fft:
            raise ValueError(f"vehicle {tr.vehicle_id}: unknown route {tr.route_id}")
        if tr.travel_time < fft[tr.route_id] - tol:
            raise ValueError(
                f"vehicle {tr.vehicle_id}: travel time {tr.travel_time} below "
                f"free-flow time {fft[tr.route_id]}"
            )


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """Uniformly sampled series with NaN as the MISSING marker."""

    grid: IntervalGrid
    values: np.ndarray
    unit: Unit = Unit.DIMENSIONLESS

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) != self.grid.n:
            raise ValueError(f"series needs {self.grid.n} values, got shape {vals.shape}")
        if np.isinf(vals).any():
            raise ValueError("series values must be finite or MISSING")
        unit = Unit(self.unit)
        present = vals[~np.isnan(vals)]
        if unit is Unit.VEH_PER_H and (present < 0).any():
            raise ValueError("flow values must be non-negative")
        if unit is Unit.SECONDS and (present <= 0).any():
            raise ValueError("travel-time values must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "unit", unit)

    @classmethod
    def missing(cls, grid: IntervalGrid, unit: Unit = Unit.DIMENSIONLESS) -> "SampledSeries":
        return cls(grid, np.full(grid.n, np.nan), unit)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, SampledSeries):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.unit == other.unit
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    @property
    def mask(self) -> np.ndarray:
        """True where a value is present."""
        return ~np.isnan(self.values)

    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def with_values(self, values) -> "SampledSeries":
        return SampledSeries(self.grid, values, self.unit)

    def to_list(self) -> list:
        return [None if math.isnan(v) else float(v) for v in self.values]


@dataclass(frozen=True)
class Sighting:
    spot_id: int
    token: str | None
    t: float


@dataclass(frozen=True)
class DetectionSet:
    sensor_id: str
    kind: SensorKind
    sightings: tuple[Sighting, ...] = field(default_factory=tuple)

    def __post_init__(self):
        kind = SensorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "sightings", tuple(self.sightings))
        for s in self.sightings:
            if kind is SensorKind.COUNT_ONLY and s.token is not None:
                raise ValueError(f"{self.sensor_id}: count_only sighting carries a token")
            if kind is not SensorKind.COUNT_ONLY and not s.token:
                raise ValueError(f"{self.sensor_id}: {kind.value} sighting without a token")

    def at_spot(self, spot_id: int) -> list[Sighting]:
        return [s for s in self.sightings if s.spot_id == spot_id]

    def check_within(self, grid: IntervalGrid):
        for s in self.sightings:
            if not (grid.start <= s.t <= grid.end):
                raise ValueError(f"{self.sensor_id}: sighting at {s.t} outside horizon")
