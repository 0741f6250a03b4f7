"""Flow and travel-time series from detections or traces.

Smoothing follows a trailing window of ``k + 1`` samples (indices ``t-k..t``),
normalized by the number of present samples (or by the weight sum for the
weighted variant).  The first ``k`` intervals are suppressed.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import DetectionSet, IntervalGrid, Route, SampledSeries, Unit, bin_counts, interval_of
from .sensors import (
    MatchedPair,
    SensorParams,
    emulate_aggregate_provider,
    emulate_counting_sensor,
    emulate_mac_sensor,
    emulate_plate_sensor,
    match_tokens,
    matching_rate,
    spot_crossing_times,
)

DEFAULT_K = 10
SOURCES = ("GT", "LP", "TC", "G")


@dataclass(frozen=True)
class SmoothingSpec:
    k: int = DEFAULT_K
    kind: str = "MA"

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("window size k must be >= 0")
        if self.kind not in ("MA", "WMA"):
            raise ValueError(f"unknown smoothing kind {self.kind!r}")


def flow_series(source, spot_id: int, grid: IntervalGrid, routes: Sequence[Route] | None = None) -> SampledSeries:
    """Vehicle count per interval scaled to veh/h.

    ``source`` is either a :class:`DetectionSet` or an iterable of traces; the
    latter needs ``routes`` to know which spots a trace crosses.
    """
    if isinstance(source, DetectionSet):
        times = [s.t for s in source.at_spot(spot_id)]
    else:
        if routes is None:
            raise ValueError("routes are required to derive flow from traces")
        times = spot_crossing_times(source, routes, spot_id)
    counts = bin_counts(grid, times)
    return SampledSeries(grid, counts * (3600.0 / grid.T), Unit.VEH_PER_H)


def moving_average(series: SampledSeries, k: int) -> SampledSeries:
    if k < 0:
        raise ValueError("window size k must be >= 0")
    x = series.values
    present = ~np.isnan(x)
    out = np.full(len(x), np.nan)
    # fsum keeps each window exactly rounded, independent of summation order
    for t in range(k, len(x)):
        win = x[t - k : t + 1][present[t - k : t + 1]]
        if len(win):
            out[t] = math.fsum(win) / len(win)
    return series.with_values(out)


def weighted_moving_average(tt: SampledSeries, weights: SampledSeries, k: int) -> SampledSeries:
    """Weight-normalized trailing average of ``tt`` with per-interval ``weights``."""
    if k < 0:
        raise ValueError("window size k must be >= 0")
    if tt.grid != weights.grid:
        raise ValueError("travel-time and weight series must share a grid")
    x, w = tt.values, weights.values
    n = len(x)
    usable = ~np.isnan(x) & ~np.isnan(w)
    wx = np.where(usable, w * np.where(usable, x, 0.0), 0.0)
    ww = np.where(usable, w, 0.0)
    out = np.full(n, np.nan)
    for t in range(k, n):
        sw = math.fsum(ww[t - k : t + 1])
        if sw > 0:
            out[t] = math.fsum(wx[t - k : t + 1]) / sw
    return tt.with_values(out)


def travel_time_series(
    records: Iterable,
    route_id: int,
    grid: IntervalGrid,
    assign: str = "exit",
    tally: Counter | None = None,
) -> SampledSeries:
    """Mean travel time of the vehicles of ``route_id`` per interval.

    ``records`` may be traces or :class:`MatchedPair`; anything with
    ``route_id``, ``t_in`` and ``t_out``.  Vehicles are assigned to the
    interval of their exit (default) or entry timestamp.  Records with a
    negative duration, or whose assignment instant is outside the horizon,
    are skipped and counted in ``tally``.
    """
    if assign not in ("exit", "entry"):
        raise ValueError(f"assign must be 'exit' or 'entry', got {assign!r}")
    tally = tally if tally is not None else Counter()
    groups: dict[int, list[float]] = {}
    for rec in records:
        if rec.route_id != route_id:
            continue
        dur = rec.t_out - rec.t_in
        if dur < 0:
            tally["rejected_negative_duration"] += 1
            continue
        t = rec.t_out if assign == "exit" else rec.t_in
        if not grid.contains(t):
            tally["outside_horizon"] += 1
            continue
        groups.setdefault(interval_of(grid, t), []).append(dur)
    out = np.full(grid.n, np.nan)
    for i, durs in groups.items():
        out[i] = math.fsum(durs) / len(durs)
    # zero-duration records are legal input but not a valid travel-time sample
    out[out == 0] = np.nan
    return SampledSeries(grid, out, Unit.SECONDS)


# -- orchestration --------------------------------------------------------------


@dataclass
class Derived:
    """All series of one run plus diagnostics, keyed ``quantity.source[.stage]``."""

    series: dict[str, SampledSeries] = field(default_factory=dict)
    diagnostics: Counter = field(default_factory=Counter)

    def assessed(self, quantity: str) -> dict[str, SampledSeries]:
        """Final (smoothed) series of one quantity by source id."""
        out = {}
        for src in SOURCES:
            key = f"{quantity}.{src}"
            if key in self.series:
                out[src] = self.series[key]
        return out


def flow_id(spot_id: int) -> str:
    return f"q{spot_id}"


def tt_id(route_id: int) -> str:
    return f"tau{route_id}"


def match_id(spot_id: int) -> str:
    return f"match{spot_id}"


def derive(
    traces,
    routes: Sequence[Route],
    spot_ids: Sequence[int],
    grid: IntervalGrid,
    params: SensorParams,
    seed: int = 0,
    k: int = DEFAULT_K,
    assessed_routes: Sequence[int] | None = None,
    detections: Mapping[str, DetectionSet] | None = None,
) -> tuple[Derived, dict[str, DetectionSet]]:
    """Emulate the sensors (unless ``detections`` is given) and derive every series.

    Flows are compared as k-interval moving averages for GT, LP (plate
    sightings) and TC (thermal counts).  Travel times use the weighted moving
    average with the source's own smoothed entry-spot flow as weight; the TC
    series (MAC re-identification) gets an extra moving average of width
    ``params.mac_smoothing_k`` standing in for vendor post-processing; G is the
    aggregate provider fed with the smoothed ground truth.
    """
    if detections is None:
        detections = {
            "TC": emulate_counting_sensor(traces, routes, params, grid, seed),
            "LP": emulate_plate_sensor(traces, routes, params, grid, seed),
            "TC-MAC": emulate_mac_sensor(traces, routes, params, grid, seed),
        }
    d = Derived()
    S = d.series
    for s in spot_ids:
        q = flow_id(s)
        raw = {
            "GT": flow_series(traces, s, grid, routes),
            "LP": flow_series(detections["LP"], s, grid),
            "TC": flow_series(detections["TC"], s, grid),
        }
        for src, ser in raw.items():
            S[f"{q}.{src}.raw"] = ser
            S[f"{q}.{src}"] = moving_average(ser, k)
            d.diagnostics[f"missing.{q}.{src}"] = S[f"{q}.{src}"].n_missing()
        S[f"{match_id(s)}.LP"] = matching_rate(detections["LP"], traces, routes, s, grid)

    lp_pairs = match_tokens(detections["LP"], routes)
    mac_pairs = match_tokens(detections["TC-MAC"], routes)
    routes_by_id = {r.id: r for r in routes}
    wanted = [r.id for r in routes] if assessed_routes is None else list(assessed_routes)
    for rid in wanted:
        entry = routes_by_id[rid].entry_spot
        q, tau = flow_id(entry), tt_id(rid)
        sources = {"GT": traces, "LP": lp_pairs, "TC": mac_pairs}
        for src, recs in sources.items():
            tally = Counter()
            raw = travel_time_series(recs, rid, grid, tally=tally)
            for key, n in tally.items():
                d.diagnostics[f"{key}.{tau}.{src}"] += n
            S[f"{tau}.{src}.raw"] = raw
            smoothed = weighted_moving_average(raw, S[f"{q}.{src}"], k)
            if src == "TC":
                smoothed = moving_average(smoothed, params.mac_smoothing_k)
            S[f"{tau}.{src}"] = smoothed
        S[f"{tau}.G"] = emulate_aggregate_provider(S[f"{tau}.GT"], params)
        for src in SOURCES:
            d.diagnostics[f"missing.{tau}.{src}"] = S[f"{tau}.{src}"].n_missing()
    return d, dict(detections)
