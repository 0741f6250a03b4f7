"""Synthetic ground truth for a three-approach signalized area.

Arrivals per route follow a time-inhomogeneous Poisson process (generated by
thinning against a piecewise-linear veh/h profile).  Each route is served by
one fixed-time controller and discharges through a vertical (point) queue at
the stop line, which sits at the route entry:

    departure_i = first green instant >= max(arrival_i, departure_{i-1} + headway)
    t_out_i     = departure_i + free_flow_time

so a vehicle's travel time is free-flow time plus red wait plus queue
discharge delay.  Loop detectors sit at a fraction of the route downstream of
the stop line; a detector at position 0 is the stop-bar detector and also
registers the dwell of the vehicle waiting at the head of the queue.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping, Sequence

import jsonschema
import numpy as np

from .core import TIME_DECIMALS, Approach, IntervalGrid, Route, Spot, VehicleTrace, interval_of

log = logging.getLogger(__name__)

GREEN = "GREEN"
RED = "RED"


@dataclass(frozen=True)
class DemandProfile:
    """Piecewise-linear arrival rate in veh/h; breakpoints are ``(t_s, rate)``."""

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(t), float(q)) for t, q in self.breakpoints)
        if not pts:
            raise ValueError("demand profile needs at least one breakpoint")
        ts = [t for t, _ in pts]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("demand breakpoints must have strictly increasing times")
        if any(q < 0 for _, q in pts):
            raise ValueError("arrival rates must be non-negative")
        object.__setattr__(self, "breakpoints", pts)

    @classmethod
    def constant(cls, rate: float, grid: IntervalGrid) -> "DemandProfile":
        return cls(((grid.start, rate), (grid.end, rate)))

    def rate(self, t):
        ts, qs = zip(*self.breakpoints)
        return np.interp(t, ts, qs)

    @property
    def peak(self) -> float:
        return max(q for _, q in self.breakpoints)

    def covers(self, grid: IntervalGrid) -> bool:
        return self.breakpoints[0][0] <= grid.start and self.breakpoints[-1][0] >= grid.end

    def minimum_over(self, grid: IntervalGrid) -> float:
        inside = [q for t, q in self.breakpoints if grid.start <= t <= grid.end]
        return float(min(inside + [self.rate(grid.start), self.rate(grid.end)]))


@dataclass(frozen=True)
class SignalPlan:
    controller_id: str
    cycle: float
    green: float
    offset: float = 0.0
    served_routes: tuple[int, ...] = ()
    saturation_headway: float = 2.0

    def __post_init__(self):
        if not 0 < self.green < self.cycle:
            raise ValueError(f"{self.controller_id}: need 0 < green < cycle")
        if not self.saturation_headway > 0:
            raise ValueError(f"{self.controller_id}: saturation_headway must be positive")
        object.__setattr__(self, "served_routes", tuple(self.served_routes))

    def _phase_pos(self, t: float) -> float:
        return (t - self.offset) % self.cycle

    def is_green(self, t: float) -> bool:
        return self._phase_pos(t) < self.green

    def next_green(self, t: float) -> float:
        """Earliest instant >= t at which the signal shows green."""
        u = self._phase_pos(t)
        if u < self.green:
            return t
        return t + (self.cycle - u)

    @property
    def capacity(self) -> float:
        """Saturated discharge capacity in veh/h."""
        return 3600.0 * self.green / (self.cycle * self.saturation_headway)

    def transitions(self, start: float, end: float) -> list[tuple[float, str]]:
        """Phase record: the state at ``start`` followed by every change before ``end``."""
        out = [(start, GREEN if self.is_green(start) else RED)]
        k = math.floor((start - self.offset) / self.cycle)
        while True:
            g_on = self.offset + k * self.cycle
            r_on = g_on + self.green
            for t, ph in ((g_on, GREEN), (r_on, RED)):
                if start < t < end and ph != out[-1][1]:
                    out.append((round(t, TIME_DECIMALS), ph))
            if g_on >= end:
                break
            k += 1
        return out


@dataclass(frozen=True)
class DetectorConfig:
    detector_id: str
    route_id: int
    position: float = 0.0
    occupied_per_vehicle: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.position <= 1.0:
            raise ValueError(f"{self.detector_id}: position must lie in [0, 1]")
        if self.occupied_per_vehicle < 0:
            raise ValueError(f"{self.detector_id}: occupied duration must be >= 0")

    @property
    def is_stop_bar(self) -> bool:
        return self.position == 0.0


@dataclass(frozen=True)
class LoopRecord:
    detector_id: str
    interval: int
    count: int
    occupancy: float

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("loop count must be >= 0")
        if not 0.0 <= self.occupancy <= 100.0:
            raise ValueError("occupancy must lie in [0, 100]")


@dataclass(frozen=True)
class PhaseLog:
    controller_id: str
    transitions: tuple[tuple[float, str], ...]

    def __post_init__(self):
        tr = tuple((float(t), str(p)) for t, p in self.transitions)
        for (t0, p0), (t1, p1) in zip(tr, tr[1:]):
            if not t1 > t0:
                raise ValueError(f"{self.controller_id}: phase timestamps must increase")
            if p0 == p1:
                raise ValueError(f"{self.controller_id}: phases must alternate")
        if any(p not in (GREEN, RED) for _, p in tr):
            raise ValueError(f"{self.controller_id}: unknown phase label")
        object.__setattr__(self, "transitions", tr)

    def onsets(self) -> list[tuple[float, str]]:
        """Actual phase changes (the leading state record is not an onset)."""
        return list(self.transitions[1:])

    def green_periods(self, end: float) -> list[tuple[float, float]]:
        periods = []
        for i, (t, ph) in enumerate(self.transitions):
            if ph == GREEN:
                t_end = self.transitions[i + 1][0] if i + 1 < len(self.transitions) else end
                periods.append((t, t_end))
        return periods


@dataclass(frozen=True)
class ScenarioConfig:
    grid: IntervalGrid
    spots: tuple[Spot, ...]
    routes: tuple[Route, ...]
    demand: Mapping[int, DemandProfile]
    signals: tuple[SignalPlan, ...]
    detectors: tuple[DetectorConfig, ...] = ()
    sensors: Mapping[str, Any] = field(default_factory=dict)
    analysis: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for name in ("spots", "routes", "signals", "detectors"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        spot_ids = [s.id for s in self.spots]
        if len(set(spot_ids)) != len(spot_ids):
            raise ValueError("spot ids must be unique")
        route_ids = [r.id for r in self.routes]
        if len(set(route_ids)) != len(route_ids):
            raise ValueError("route ids must be unique")
        for r in self.routes:
            if r.entry_spot not in spot_ids or r.exit_spot not in spot_ids:
                raise ValueError(f"route {r.id} references an unknown spot")
            if r.id not in self.demand:
                raise ValueError(f"route {r.id} has no demand profile")
            if not self.demand[r.id].covers(self.grid):
                raise ValueError(f"demand profile of route {r.id} does not cover the horizon")
        served = [rid for s in self.signals for rid in s.served_routes]
        for rid in route_ids:
            if served.count(rid) != 1:
                raise ValueError(f"route {rid} must be served by exactly one controller")
        for d in self.detectors:
            if d.route_id not in route_ids:
                raise ValueError(f"detector {d.detector_id} references unknown route {d.route_id}")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    def route(self, route_id: int) -> Route:
        for r in self.routes:
            if r.id == route_id:
                return r
        raise KeyError(route_id)

    def controller_of(self, route_id: int) -> SignalPlan:
        for s in self.signals:
            if route_id in s.served_routes:
                return s
        raise KeyError(route_id)

    def detectors_of(self, route_id: int) -> list[DetectorConfig]:
        return [d for d in self.detectors if d.route_id == route_id]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return _replace(self, seed=seed)

    def with_sensors(self, **overrides) -> "ScenarioConfig":
        return _replace(self, sensors={**self.sensors, **overrides})


def _replace(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


@dataclass(frozen=True)
class SimulationResult:
    traces: tuple[VehicleTrace, ...]
    loops: tuple[LoopRecord, ...]
    phases: tuple[PhaseLog, ...]
    arrivals: Mapping[int, int]
    warnings: tuple[str, ...] = ()

    @property
    def infeasible(self) -> bool:
        return bool(self.warnings)


# -- simulation ---------------------------------------------------------------


def poisson_arrivals(profile: DemandProfile, grid: IntervalGrid, rng: np.random.Generator) -> np.ndarray:
    """Arrival instants on ``[start, end)`` by thinning a homogeneous process at peak rate."""
    lam_max = profile.peak / 3600.0
    if lam_max <= 0:
        return np.empty(0)
    expected = lam_max * grid.horizon
    out = []
    t = grid.start
    while t < grid.end:
        chunk = int(expected + 10 * math.sqrt(expected) + 16)
        gaps = rng.exponential(1.0 / lam_max, size=chunk)
        u = rng.random(size=chunk)
        times = t + np.cumsum(gaps)
        keep = u * lam_max < profile.rate(times) / 3600.0
        inside = times < grid.end
        out.append(times[keep & inside])
        t = times[-1]
    arr = np.round(np.concatenate(out), TIME_DECIMALS)
    return arr[arr < grid.end]


def discharge(arrivals: Sequence[float], plan: SignalPlan) -> np.ndarray:
    """Stop-line departure instants of a FIFO point queue."""
    deps = np.empty(len(arrivals))
    prev = -math.inf
    h = plan.saturation_headway
    for i, a in enumerate(arrivals):
        prev = plan.next_green(max(a, prev + h))
        deps[i] = prev
    return deps


def simulate(config: ScenarioConfig) -> SimulationResult:
    """Generate traces, loop logs and phase logs for ``config``.

    The output is a pure function of the config (including its seed).
    """
    grid = config.grid
    traces: list[VehicleTrace] = []
    arrivals_per_route = {}
    warnings = []
    for route in config.routes:
        plan = config.controller_of(route.id)
        profile = config.demand[route.id]
        if profile.minimum_over(grid) > plan.capacity:
            msg = (
                f"route {route.id}: demand exceeds capacity {plan.capacity:.0f} veh/h "
                f"over the whole horizon; queue diverges"
            )
            log.warning(msg)
            warnings.append(msg)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, route.id]))
        arr = poisson_arrivals(profile, grid, rng)
        deps = discharge(arr, plan)
        arrivals_per_route[route.id] = len(arr)
        for i, (a, d) in enumerate(zip(arr, deps)):
            t_out = round(float(d) + route.free_flow_time, TIME_DECIMALS)
            traces.append(VehicleTrace(f"r{route.id}-{i:05d}", route.id, float(a), t_out))
    traces.sort(key=lambda tr: (tr.t_in, tr.vehicle_id))
    phases = tuple(
        PhaseLog(s.controller_id, tuple(s.transitions(grid.start, grid.end))) for s in config.signals
    )
    loops = loop_logs(traces, config.detectors, grid, config.routes)
    return SimulationResult(tuple(traces), tuple(loops), phases, arrivals_per_route, tuple(warnings))


def _route_passages(traces, route: Route):
    """(departure, head-of-queue time) per vehicle of one route, in departure order."""
    own = sorted((tr for tr in traces if tr.route_id == route.id), key=lambda tr: tr.t_out)
    out = []
    prev_dep = -math.inf
    for tr in own:
        dep = tr.t_out - route.free_flow_time
        head = min(max(tr.t_in, prev_dep), dep)
        out.append((dep, head))
        prev_dep = dep
    return out


def detector_actuations(traces, detectors: Sequence[DetectorConfig], routes: Sequence[Route]) -> dict[str, np.ndarray]:
    """Sorted crossing instants per detector."""
    by_id = {r.id: r for r in routes}
    out = {}
    for det in detectors:
        route = by_id[det.route_id]
        deps = [dep for dep, _ in _route_passages(traces, route)]
        out[det.detector_id] = np.sort(np.asarray(deps) + det.position * route.free_flow_time)
    return out


def _add_span(occupied: np.ndarray, grid: IntervalGrid, a: float, b: float):
    a, b = max(a, grid.start), min(b, grid.end)
    if b <= a:
        return
    i0 = interval_of(grid, a)
    i1 = interval_of(grid, b) if b < grid.end else grid.n - 1
    for i in range(i0, i1 + 1):
        lo = grid.interval_start(i)
        occupied[i] += max(0.0, min(b, lo + grid.T) - max(a, lo))


def loop_logs(traces, detectors: Sequence[DetectorConfig], grid: IntervalGrid, routes: Sequence[Route]) -> list[LoopRecord]:
    """Per-interval count and occupancy for every detector.

    Occupancy is ``100 * sum(occupied seconds in interval) / T`` clamped to
    [0, 100]; overlapping vehicle spans are summed, not merged.
    """
    by_id = {r.id: r for r in routes}
    records = []
    for det in detectors:
        route = by_id[det.route_id]
        counts = np.zeros(grid.n, dtype=np.int64)
        occupied = np.zeros(grid.n)
        shift = det.position * route.free_flow_time
        for dep, head in _route_passages(traces, route):
            c = dep + shift
            if grid.contains(c):
                counts[interval_of(grid, c)] += 1
            start = head if det.is_stop_bar else c
            _add_span(occupied, grid, start, c + det.occupied_per_vehicle)
        occ = np.clip(100.0 * occupied / grid.T, 0.0, 100.0)
        for i in range(grid.n):
            records.append(LoopRecord(det.detector_id, i, int(counts[i]), float(occ[i])))
    return records


# -- configuration documents --------------------------------------------------

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_SCHEDULE = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "prefixItems": [_NONNEG, _PROB], "minItems": 2, "maxItems": 2},
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["grid", "spots", "routes", "demand", "signals"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "required": ["horizon", "T"],
            "additionalProperties": False,
            "properties": {"start": _NONNEG, "horizon": _POS, "T": _POS},
        },
        "spots": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "approach"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "approach": {"enum": [a.value for a in Approach]},
                    "label": {"type": "string"},
                },
            },
        },
        "routes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "entry_spot", "exit_spot", "free_flow_time"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "entry_spot": {"type": "integer"},
                    "exit_spot": {"type": "integer"},
                    "free_flow_time": _POS,
                },
            },
        },
        "demand": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["route_id", "profile"],
                "additionalProperties": False,
                "properties": {
                    "route_id": {"type": "integer"},
                    "profile": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "array", "prefixItems": [_NONNEG, _NONNEG], "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
        "signals": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["controller_id", "cycle", "green", "served_routes", "saturation_headway"],
                "additionalProperties": False,
                "properties": {
                    "controller_id": {"type": "string"},
                    "cycle": _POS,
                    "green": _POS,
                    "offset": _NONNEG,
                    "served_routes": {"type": "array", "items": {"type": "integer"}},
                    "saturation_headway": _POS,
                },
            },
        },
        "detectors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["detector_id", "route_id", "position"],
                "additionalProperties": False,
                "properties": {
                    "detector_id": {"type": "string"},
                    "route_id": {"type": "integer"},
                    "position": _PROB,
                    "occupied_per_vehicle": _NONNEG,
                },
            },
        },
        "sensors": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count_detect_prob": _PROB,
                "plate_recog_schedule": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "default": _SCHEDULE,
                        "by_spot": {"type": "object", "additionalProperties": _SCHEDULE},
                    },
                },
                "mac_penetration": _PROB,
                "mac_smoothing_k": {"type": "integer", "minimum": 0},
                "probe_rate": _PROB,
                "aggregate_bias": _POS,
                "aggregate_ema_alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "seed_offsets": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "assessed_routes": {"type": "array", "items": {"type": "integer"}},
                "showcase_route": {"type": "integer"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Scenario document failed to parse or validate."""


def config_from_dict(doc: Mapping[str, Any]) -> ScenarioConfig:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise ConfigError(f"scenario schema violation at {where}: {exc.message}") from None
    g = doc["grid"]
    try:
        grid = IntervalGrid(float(g.get("start", 0.0)), float(g["horizon"]), float(g["T"]))
        return ScenarioConfig(
            grid=grid,
            spots=tuple(Spot(s["id"], s["approach"], s.get("label", "")) for s in doc["spots"]),
            routes=tuple(
                Route(r["id"], r["entry_spot"], r["exit_spot"], float(r["free_flow_time"]))
                for r in doc["routes"]
            ),
            demand={d["route_id"]: DemandProfile(tuple(map(tuple, d["profile"]))) for d in doc["demand"]},
            signals=tuple(
                SignalPlan(
                    s["controller_id"],
                    float(s["cycle"]),
                    float(s["green"]),
                    float(s.get("offset", 0.0)),
                    tuple(s["served_routes"]),
                    float(s["saturation_headway"]),
                )
                for s in doc["signals"]
            ),
            detectors=tuple(
                DetectorConfig(d["detector_id"], d["route_id"], float(d["position"]), float(d.get("occupied_per_vehicle", 0.5)))
                for d in doc.get("detectors", [])
            ),
            sensors=dict(doc.get("sensors", {})),
            analysis=dict(doc.get("analysis", {})),
            seed=int(doc.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None


def config_to_dict(cfg: ScenarioConfig) -> dict:
    doc = {
        "seed": cfg.seed,
        "grid": {"start": cfg.grid.start, "horizon": cfg.grid.horizon, "T": cfg.grid.T},
        "spots": [{"id": s.id, "approach": s.approach.value, "label": s.label} for s in cfg.spots],
        "routes": [
            {"id": r.id, "entry_spot": r.entry_spot, "exit_spot": r.exit_spot, "free_flow_time": r.free_flow_time}
            for r in cfg.routes
        ],
        "demand": [
            {"route_id": rid, "profile": [list(p) for p in prof.breakpoints]}
            for rid, prof in sorted(cfg.demand.items())
        ],
        "signals": [
            {
                "controller_id": s.controller_id,
                "cycle": s.cycle,
                "green": s.green,
                "offset": s.offset,
                "served_routes": list(s.served_routes),
                "saturation_headway": s.saturation_headway,
            }
            for s in cfg.signals
        ],
        "detectors": [
            {
                "detector_id": d.detector_id,
                "route_id": d.route_id,
                "position": d.position,
                "occupied_per_vehicle": d.occupied_per_vehicle,
            }
            for d in cfg.detectors
        ],
    }
    if cfg.sensors:
        doc["sensors"] = json.loads(json.dumps(cfg.sensors))
    if cfg.analysis:
        doc["analysis"] = json.loads(json.dumps(cfg.analysis))
    return doc


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(doc)


def default_config_dict() -> dict:
    text = resources.files("urbantse").joinpath("data/default_scenario.json").read_text(encoding="utf-8")
    return json.loads(text)


def default_config(seed: int | None = None) -> ScenarioConfig:
    """The shipped synthetic evening-peak scenario (no fidelity claim to any real site)."""
    cfg = config_from_dict(default_config_dict())
    return cfg if seed is None else cfg.with_seed(seed)
