"""CSV (de)serialization for every dataset the toolkit exchanges.

All files are UTF-8, comma separated, with a mandatory header row.  Floats
are written with ``repr`` so that reading and re-writing a file is
byte-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import DetectionSet, IntervalGrid, SampledSeries, SensorKind, Sighting, Unit, VehicleTrace
from .simnet import GREEN, RED, LoopRecord, PhaseLog

TRACES_HEADER = ["vehicle_id", "route_id", "t_in_s", "t_out_s"]
DETECTIONS_HEADER = ["sensor_id", "kind", "spot_id", "token", "t_s"]
SERIES_HEADER = ["series_id", "interval_index", "value", "unit"]
LOOPS_HEADER = ["detector_id", "interval_index", "count", "occupancy_pct"]
PHASES_HEADER = ["controller_id", "t_s", "phase"]


class ParseError(ValueError):
    """Malformed row; carries the 1-based line number."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class SchemaError(ParseError):
    """Structurally valid CSV whose content violates the schema (units, gaps, header)."""


def fmt_float(x: float) -> str:
    return repr(float(x))


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _rows(path, header: list[str]):
    """Yield ``(line_number, record)`` after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise SchemaError(path, 1, f"expected header {','.join(header)}, got {got}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(rec)}")
            yield lineno, rec


def _finite(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {s!r}")
    return v


# -- traces -------------------------------------------------------------------


def write_traces(traces: Iterable[VehicleTrace], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(TRACES_HEADER)
        for tr in traces:
            w.writerow([tr.vehicle_id, tr.route_id, fmt_float(tr.t_in), fmt_float(tr.t_out)])


def read_traces(path) -> list[VehicleTrace]:
    out = []
    for lineno, (vid, rid, t_in, t_out) in _rows(path, TRACES_HEADER):
        try:
            out.append(VehicleTrace(vid, int(rid), _finite(t_in), _finite(t_out)))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    return out


# -- detections ---------------------------------------------------------------


def write_detections(sets: Iterable[DetectionSet], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(DETECTIONS_HEADER)
        for ds in sets:
            for s in ds.sightings:
                w.writerow([ds.sensor_id, ds.kind.value, s.spot_id, s.token or "", fmt_float(s.t)])


def read_detections(path) -> list[DetectionSet]:
    """Detection sets in order of first appearance."""
    kinds: dict[str, SensorKind] = {}
    sightings: dict[str, list[Sighting]] = {}
    for lineno, (sid, kind, spot, tok, t) in _rows(path, DETECTIONS_HEADER):
        try:
            k = SensorKind(kind)
            s = Sighting(int(spot), tok or None, _finite(t))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        if kinds.setdefault(sid, k) is not k:
            raise SchemaError(path, lineno, f"sensor {sid} changes kind to {kind}")
        if (k is SensorKind.COUNT_ONLY) != (s.token is None):
            raise SchemaError(path, lineno, f"token presence does not match kind {kind}")
        sightings.setdefault(sid, []).append(s)
    return [DetectionSet(sid, kinds[sid], tuple(v)) for sid, v in sightings.items()]


# -- series -------------------------------------------------------------------


def write_series(series: Mapping[str, SampledSeries], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(SERIES_HEADER)
        for sid, ser in series.items():
            for i, v in enumerate(ser.values):
                w.writerow([sid, i, "NA" if math.isnan(v) else fmt_float(v), ser.unit.value])


def read_series(path, grid: IntervalGrid | None = None) -> dict[str, SampledSeries]:
    """Series keyed by id, in file order.

    Without ``grid`` each series gets a 60 s grid starting at 0 sized by its
    row count.  Indices must run 0..n-1 without gaps; a unit may not change
    within a series.
    """
    values: dict[str, list[float]] = {}
    units: dict[str, Unit] = {}
    for lineno, (sid, idx, val, unit) in _rows(path, SERIES_HEADER):
        try:
            i = int(idx)
            v = math.nan if val == "NA" else _finite(val)
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        try:
            u = Unit(unit)
        except ValueError:
            raise SchemaError(path, lineno, f"unknown unit {unit!r}") from None
        if units.setdefault(sid, u) is not u:
            raise SchemaError(path, lineno, f"series {sid} switches unit {units[sid].value} -> {unit}")
        vals = values.setdefault(sid, [])
        if i != len(vals):
            raise SchemaError(path, lineno, f"series {sid}: expected interval {len(vals)}, got {i}")
        vals.append(v)
    out = {}
    for sid, vals in values.items():
        g = grid if grid is not None else IntervalGrid(0.0, 60.0 * len(vals), 60.0)
        try:
            out[sid] = SampledSeries(g, np.array(vals), units[sid])
        except ValueError as exc:
            raise SchemaError(path, 0, f"series {sid}: {exc}") from None
    return out


# -- loops and phases ---------------------------------------------------------


def write_loops(records: Iterable[LoopRecord], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(LOOPS_HEADER)
        for r in records:
            w.writerow([r.detector_id, r.interval, r.count, fmt_float(r.occupancy)])


def read_loops(path) -> list[LoopRecord]:
    out = []
    for lineno, (did, idx, cnt, occ) in _rows(path, LOOPS_HEADER):
        try:
            out.append(LoopRecord(did, int(idx), int(cnt), _finite(occ)))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    return out


def write_phases(logs: Iterable[PhaseLog], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(PHASES_HEADER)
        for lg in logs:
            for t, ph in lg.transitions:
                w.writerow([lg.controller_id, fmt_float(t), ph])


def read_phases(path) -> list[PhaseLog]:
    trans: dict[str, list[tuple[float, str]]] = {}
    for lineno, (cid, t, ph) in _rows(path, PHASES_HEADER):
        if ph not in (GREEN, RED):
            raise SchemaError(path, lineno, f"unknown phase {ph!r}")
        try:
            trans.setdefault(cid, []).append((_finite(t), ph))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    try:
        return [PhaseLog(cid, tuple(tr)) for cid, tr in trans.items()]
    except ValueError as exc:
        raise SchemaError(path, 0, str(exc)) from None


# -- generic dispatch ---------------------------------------------------------

_READERS = {
    tuple(TRACES_HEADER): ("traces", read_traces),
    tuple(DETECTIONS_HEADER): ("detections", read_detections),
    tuple(SERIES_HEADER): ("series", read_series),
    tuple(LOOPS_HEADER): ("loops", read_loops),
    tuple(PHASES_HEADER): ("phases", read_phases),
}

_WRITERS = {
    "traces": write_traces,
    "detections": write_detections,
    "series": write_series,
    "loops": write_loops,
    "phases": write_phases,
}


@dataclass(frozen=True)
class Dataset:
    kind: str
    data: object = field(compare=True)


def read_dataset(path) -> Dataset:
    """Read any toolkit CSV, recognizing its type from the header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None or tuple(header) not in _READERS:
        raise SchemaError(path, 1, f"unrecognized header {header}")
    kind, reader = _READERS[tuple(header)]
    return Dataset(kind, reader(path))


def write_dataset(dataset: Dataset, path) -> None:
    _WRITERS[dataset.kind](dataset.data, Path(path))
