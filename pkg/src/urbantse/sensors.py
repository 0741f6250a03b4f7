"""Sensor emulators that degrade ground-truth traces.

Every emulator draws one uniform number per decision from its own
sub-seeded generator, in vehicle-id order, and detects when the draw falls
below the detection probability.  Draws are made whether or not they are
used, so two runs that differ only in a probability are coupled: raising the
probability can only add sightings.
"""

from __future__ import annotations

import hashlib
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .core import (
    DetectionSet,
    IntervalGrid,
    Route,
    SampledSeries,
    SensorKind,
    Sighting,
    Unit,
    VehicleTrace,
    bin_counts,
)

SENSOR_IDS = {"count": "TC", "plate": "LP", "mac": "TC-MAC"}
DEFAULT_SEED_OFFSETS = {"count": 101, "plate": 202, "mac": 303, "probe": 404}


@dataclass(frozen=True)
class PlateSchedule:
    """Piecewise-constant recognition probability per spot.

    Each schedule is a sequence of ``(t_from, prob)``; the probability at ``t``
    is the one of the last breakpoint with ``t_from <= t``.
    """

    default: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    by_spot: Mapping[int, tuple[tuple[float, float], ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "default", _check_schedule(self.default))
        object.__setattr__(
            self, "by_spot", {int(k): _check_schedule(v) for k, v in dict(self.by_spot).items()}
        )

    @classmethod
    def constant(cls, prob: float) -> "PlateSchedule":
        return cls(((0.0, prob),))

    def prob(self, spot_id: int, t: float) -> float:
        sched = self.by_spot.get(spot_id, self.default)
        i = bisect_right([b[0] for b in sched], t) - 1
        return sched[max(i, 0)][1]

    def scaled(self, factor: float) -> "PlateSchedule":
        def sc(s):
            return tuple((t, min(1.0, p * factor)) for t, p in s)

        return PlateSchedule(sc(self.default), {k: sc(v) for k, v in self.by_spot.items()})


def _check_schedule(sched) -> tuple[tuple[float, float], ...]:
    pts = tuple((float(t), float(p)) for t, p in sched)
    if not pts:
        raise ValueError("empty recognition schedule")
    if any(not 0.0 <= p <= 1.0 for _, p in pts):
        raise ValueError("recognition probabilities must lie in [0, 1]")
    if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
        raise ValueError("schedule breakpoints must increase")
    return pts


@dataclass(frozen=True)
class SensorParams:
    count_detect_prob: float = 0.96
    plate_recog_schedule: PlateSchedule = field(default_factory=PlateSchedule)
    mac_penetration: float = 0.05
    mac_smoothing_k: int = 20
    probe_rate: float = 0.05
    aggregate_bias: float = 1.0
    aggregate_ema_alpha: float = 0.05
    seed_offsets: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_SEED_OFFSETS))

    def __post_init__(self):
        for name in ("count_detect_prob", "mac_penetration", "probe_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.mac_smoothing_k < 0:
            raise ValueError("mac_smoothing_k must be >= 0")
        if not self.aggregate_bias > 0:
            raise ValueError("aggregate_bias must be positive")
        if not 0.0 < self.aggregate_ema_alpha <= 1.0:
            raise ValueError("aggregate_ema_alpha must lie in (0, 1]")
        object.__setattr__(self, "seed_offsets", {**DEFAULT_SEED_OFFSETS, **dict(self.seed_offsets)})

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SensorParams":
        doc = dict(doc)
        sched = doc.pop("plate_recog_schedule", None)
        if sched is not None:
            doc["plate_recog_schedule"] = PlateSchedule(
                sched.get("default", ((0.0, 1.0),)),
                {int(k): v for k, v in sched.get("by_spot", {}).items()},
            )
        return cls(**doc)

    @classmethod
    def perfect(cls) -> "SensorParams":
        """Every sensor sees every vehicle and adds no post-processing."""
        return cls(
            count_detect_prob=1.0,
            plate_recog_schedule=PlateSchedule.constant(1.0),
            mac_penetration=1.0,
            mac_smoothing_k=0,
            probe_rate=1.0,
            aggregate_bias=1.0,
            aggregate_ema_alpha=1.0,
        )

    def rng(self, sensor: str, seed: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([seed, self.seed_offsets[sensor]]))


def token_for(vehicle_id: str, kind: str) -> str:
    """Opaque, deterministic stand-in for a plate or MAC address."""
    return hashlib.sha256(f"{kind}:{vehicle_id}".encode()).hexdigest()[:16]


def _by_vehicle(traces: Iterable[VehicleTrace]) -> list[VehicleTrace]:
    return sorted(traces, key=lambda tr: tr.vehicle_id)


def _crossings(traces, routes: Sequence[Route]):
    """(trace, spot, t) in draw order: entry then exit per vehicle."""
    by_id = {r.id: r for r in routes}
    for tr in _by_vehicle(traces):
        r = by_id[tr.route_id]
        yield tr, r.entry_spot, tr.t_in
        yield tr, r.exit_spot, tr.t_out


def spot_crossing_times(traces, routes: Sequence[Route], spot_id: int) -> list[float]:
    return sorted(t for _, s, t in _crossings(traces, routes) if s == spot_id)


def _in_horizon(grid: IntervalGrid | None, t: float) -> bool:
    return grid is None or grid.contains(t)


def emulate_counting_sensor(traces, routes, params: SensorParams, grid: IntervalGrid | None = None, seed: int = 0) -> DetectionSet:
    crossings = list(_crossings(traces, routes))
    u = params.rng("count", seed).random(len(crossings))
    sightings = [
        Sighting(spot, None, t)
        for (tr, spot, t), ui in zip(crossings, u)
        if ui < params.count_detect_prob and _in_horizon(grid, t)
    ]
    return DetectionSet(SENSOR_IDS["count"], SensorKind.COUNT_ONLY, tuple(sightings))


def emulate_plate_sensor(traces, routes, params: SensorParams, grid: IntervalGrid | None = None, seed: int = 0) -> DetectionSet:
    crossings = list(_crossings(traces, routes))
    u = params.rng("plate", seed).random(len(crossings))
    sched = params.plate_recog_schedule
    sightings = [
        Sighting(spot, token_for(tr.vehicle_id, "plate"), t)
        for (tr, spot, t), ui in zip(crossings, u)
        if ui < sched.prob(spot, t) and _in_horizon(grid, t)
    ]
    return DetectionSet(SENSOR_IDS["plate"], SensorKind.PLATE, tuple(sightings))


def emulate_mac_sensor(traces, routes, params: SensorParams, grid: IntervalGrid | None = None, seed: int = 0) -> DetectionSet:
    by_id = {r.id: r for r in routes}
    vehicles = _by_vehicle(traces)
    u = params.rng("mac", seed).random(len(vehicles))
    sightings = []
    for tr, ui in zip(vehicles, u):
        if ui >= params.mac_penetration:
            continue
        r = by_id[tr.route_id]
        tok = token_for(tr.vehicle_id, "mac")
        for spot, t in ((r.entry_spot, tr.t_in), (r.exit_spot, tr.t_out)):
            if _in_horizon(grid, t):
                sightings.append(Sighting(spot, tok, t))
    return DetectionSet(SENSOR_IDS["mac"], SensorKind.MAC, tuple(sightings))


def emulate_probe_sample(traces, params: SensorParams, seed: int = 0) -> list[VehicleTrace]:
    """Per-vehicle Bernoulli subset, timestamps untouched, input order kept."""
    traces = list(traces)
    order = sorted(range(len(traces)), key=lambda i: traces[i].vehicle_id)
    u = params.rng("probe", seed).random(len(traces))
    keep = np.zeros(len(traces), dtype=bool)
    for j, i in enumerate(order):
        keep[i] = u[j] < params.probe_rate
    return [tr for tr, k in zip(traces, keep) if k]


def emulate_aggregate_provider(ground_truth_tt: SampledSeries, params: SensorParams) -> SampledSeries:
    """Exponentially smoothed, biased copy of the true travel-time series.

    Missing inputs hold the smoother's state; output is MISSING only until
    the first observation.
    """
    a = params.aggregate_ema_alpha
    out = np.full(len(ground_truth_tt), np.nan)
    state = None
    for i, x in enumerate(ground_truth_tt.values):
        if not np.isnan(x):
            state = x if state is None else a * x + (1.0 - a) * state
        if state is not None:
            out[i] = params.aggregate_bias * state
    return SampledSeries(ground_truth_tt.grid, out, Unit.SECONDS)


def matching_rate(detections: DetectionSet, traces, routes, spot_id: int, grid: IntervalGrid) -> SampledSeries:
    """Detected / ground-truth crossings per interval; MISSING where truth is zero."""
    det = bin_counts(grid, (s.t for s in detections.at_spot(spot_id)))
    truth = bin_counts(grid, spot_crossing_times(traces, routes, spot_id))
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(truth > 0, det / np.maximum(truth, 1), np.nan)
    return SampledSeries(grid, rate, Unit.DIMENSIONLESS)


def average_rate(series: SampledSeries) -> float | None:
    """Period average of a per-interval rate series (None when all MISSING)."""
    present = series.values[series.mask]
    return float(present.mean()) if len(present) else None


class MatchedPair(NamedTuple):
    """A token seen at a route's entry and exit; no ordering invariant enforced."""

    token: str
    route_id: int
    t_in: float
    t_out: float


def match_tokens(detections: DetectionSet, routes: Sequence[Route]) -> list[MatchedPair]:
    """Re-identify tokens between entry and exit spots of each route."""
    if detections.kind is SensorKind.COUNT_ONLY:
        raise ValueError("count-only detections carry no tokens to match")
    route_of = {(r.entry_spot, r.exit_spot): r.id for r in routes}
    seen: dict[str, list[Sighting]] = {}
    for s in detections.sightings:
        seen.setdefault(s.token, []).append(s)
    pairs = []
    for tok, sights in seen.items():
        for a in sights:
            for b in sights:
                rid = route_of.get((a.spot_id, b.spot_id))
                if rid is not None:
                    pairs.append(MatchedPair(tok, rid, a.t, b.t))
    pairs.sort(key=lambda p: (p.route_id, p.t_out, p.token))
    return pairs
