"""Command-line entry point.

A run directory (``--out``) accumulates the artifacts of each stage::

    urbantse simulate --out run            # scenario.json traces.csv loops.csv phases.csv
    urbantse derive   --out run            # detections.csv series.csv diagnostics.json
    urbantse assess   --out run            # report.csv
    urbantse estimate --out run            # model.csv model_base.csv experiment_report.csv estimation.csv
    urbantse plotdata --out run            # plot_*.csv

Every stage also writes ``manifest_<stage>.json`` listing its artifacts with
SHA-256 digests.  Exit codes: 0 success, 2 invalid scenario or malformed
input file, 3 output directory not writable, 4 upstream artifact missing.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .io import (
    ParseError,
    read_loops,
    read_phases,
    read_series,
    read_traces,
    write_detections,
    write_loops,
    write_phases,
    write_series,
    write_traces,
)
from .metrics import assemble_report, format_table, write_report
from .mlr import InsufficientDataError, format_experiment, route_experiment, write_experiment_report, write_models
from .pipeline import DEFAULT_K, derive
from .sensors import SensorParams, average_rate
from .simnet import ConfigError, ScenarioConfig, config_from_dict, config_to_dict, default_config, load_config, simulate

EXIT_OK, EXIT_SCHEMA, EXIT_UNWRITABLE, EXIT_MISSING = 0, 2, 3, 4

SCENARIO_FILE = "scenario.json"
ESTIMATION_FILE = "estimation.csv"
OVERLAY_IDS = ("truth", "sample", "base", "final")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- helpers --------------------------------------------------------------------


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _prepare_out(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise CliError(EXIT_UNWRITABLE, f"output directory {out} is not writable: {exc}") from None
    return out


def _require(path: Path) -> Path:
    if not path.is_file():
        raise CliError(EXIT_MISSING, f"missing upstream artifact: {path}")
    return path


def _scenario(args) -> ScenarioConfig:
    """--config wins; otherwise the run directory's scenario.json, else the default."""
    try:
        if args.config:
            cfg = load_config(args.config)
        elif (Path(args.out) / SCENARIO_FILE).is_file() and args.command != "simulate":
            cfg = load_config(Path(args.out) / SCENARIO_FILE)
        elif args.command == "simulate":
            cfg = default_config()
        else:
            raise CliError(EXIT_MISSING, f"missing upstream artifact: {Path(args.out) / SCENARIO_FILE}")
    except OSError as exc:
        raise CliError(EXIT_MISSING, f"cannot read scenario: {exc}") from None
    except ConfigError as exc:
        raise CliError(EXIT_SCHEMA, str(exc)) from None
    return cfg if args.seed is None else cfg.with_seed(args.seed)


def _params(cfg: ScenarioConfig, args) -> SensorParams:
    doc = dict(cfg.sensors)
    if args.probe_rate is not None:
        doc["probe_rate"] = args.probe_rate
    try:
        return SensorParams.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_SCHEMA, f"invalid sensor parameters: {exc}") from None


def _read(reader, path: Path, *extra):
    try:
        return reader(_require(path), *extra)
    except ParseError as exc:
        raise CliError(EXIT_SCHEMA, str(exc)) from None


def _manifest(out: Path, stage: str, cfg: ScenarioConfig, args, artifacts: Sequence[tuple[str, str]]) -> Path:
    doc = {
        "stage": stage,
        "tool_version": __version__,
        "scenario": str(args.config) if args.config else (SCENARIO_FILE if stage != "simulate" else "(default)"),
        "seed": cfg.seed,
        "output_dir": str(args.out),
        "options": {"k": args.k, "probe_rate": args.probe_rate},
        "artifacts": [
            {"path": name, "kind": kind, "sha256": sha256_of(out / name)} for name, kind in artifacts
        ],
    }
    path = out / f"manifest_{stage}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- stages ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    out = _prepare_out(Path(args.out))
    res = simulate(cfg)
    _dump_json(config_to_dict(cfg), out / SCENARIO_FILE)
    write_traces(res.traces, out / "traces.csv")
    write_loops(res.loops, out / "loops.csv")
    write_phases(res.phases, out / "phases.csv")
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _manifest(out, "simulate", cfg, args, [("traces.csv", "traces"), ("loops.csv", "loops"), ("phases.csv", "phases")])
    print(f"{len(res.traces)} vehicles simulated -> {out}")
    return EXIT_OK


def cmd_derive(args) -> int:
    out = Path(args.out)
    cfg = _scenario(args)
    traces = _read(read_traces, out / "traces.csv")
    _prepare_out(out)
    params = _params(cfg, args)
    derived, detections = derive(
        traces,
        cfg.routes,
        [s.id for s in cfg.spots],
        cfg.grid,
        params,
        seed=cfg.seed,
        k=args.k,
        assessed_routes=cfg.analysis.get("assessed_routes"),
    )
    write_detections(detections.values(), out / "detections.csv")
    write_series(derived.series, out / "series.csv")
    _dump_json(dict(sorted(derived.diagnostics.items())), out / "diagnostics.json")
    _manifest(
        out,
        "derive",
        cfg,
        args,
        [("detections.csv", "detections"), ("series.csv", "series"), ("diagnostics.json", "diagnostics")],
    )
    print(f"{len(derived.series)} series derived -> {out / 'series.csv'}")
    return EXIT_OK


def _split_id(sid: str) -> tuple[str, str, str | None]:
    parts = sid.split(".")
    return parts[0], parts[1] if len(parts) > 1 else "", parts[2] if len(parts) > 2 else None


def report_from_series(series) -> "AssessmentReport":  # noqa: F821
    quantities: dict[str, dict] = {}
    rates = {}
    for sid, ser in series.items():
        q, src, stage = _split_id(sid)
        if stage is not None:
            continue
        if q.startswith("match"):
            rate = average_rate(ser)
            if rate is not None:
                rates[("q" + q[len("match"):], src)] = rate
            continue
        quantities.setdefault(q, {})[src] = ser
    return assemble_report({q: v for q, v in quantities.items() if "GT" in v}, rates)


def cmd_assess(args) -> int:
    out = Path(args.out)
    cfg = _scenario(args)
    series = _read(read_series, out / "series.csv", cfg.grid)
    _prepare_out(out)
    report = report_from_series(series)
    write_report(report, out / "report.csv")
    _manifest(out, "assess", cfg, args, [("report.csv", "report")])
    print(format_table(report))
    return EXIT_OK


def _estimated_routes(cfg: ScenarioConfig, args) -> list[int]:
    if args.route:
        return list(args.route)
    show = cfg.analysis.get("showcase_route")
    return [show] if show is not None else [r.id for r in cfg.routes]


def cmd_estimate(args) -> int:
    out = Path(args.out)
    cfg = _scenario(args)
    traces = _read(read_traces, out / "traces.csv")
    loops = _read(read_loops, out / "loops.csv")
    phases = _read(read_phases, out / "phases.csv")
    _prepare_out(out)
    params = _params(cfg, args)
    results = []
    for rid in _estimated_routes(cfg, args):
        try:
            cfg.route(rid)
        except KeyError:
            raise CliError(EXIT_SCHEMA, f"route {rid} is not part of the scenario") from None
        try:
            results.append(route_experiment(cfg, traces, loops, phases, rid, params, k=args.k))
        except InsufficientDataError as exc:
            print(f"warning: route {rid} skipped: {exc}", file=sys.stderr)
    write_models([r.final for r in results], out / "model.csv")
    write_models([r.baseline for r in results], out / "model_base.csv")
    write_experiment_report(results, out / "experiment_report.csv")
    overlay = {}
    for r in results:
        for label, ser in zip(OVERLAY_IDS, (r.truth, r.sample, r.base_estimate, r.final_estimate)):
            overlay[f"r{r.route_id}.{label}"] = ser
    write_series(overlay, out / ESTIMATION_FILE)
    _manifest(
        out,
        "estimate",
        cfg,
        args,
        [
            ("model.csv", "model"),
            ("model_base.csv", "model"),
            ("experiment_report.csv", "experiment_report"),
            (ESTIMATION_FILE, "series"),
        ],
    )
    for r in results:
        print(format_experiment(r))
    return EXIT_OK


def _family(series, keep) -> dict:
    # all-missing series carry nothing to plot
    return {sid: s for sid, s in series.items() if keep(sid) and s.mask.any()}


def cmd_plotdata(args) -> int:
    out = Path(args.out)
    cfg = _scenario(args)
    series = _read(read_series, out / "series.csv", cfg.grid)
    est_path = out / ESTIMATION_FILE
    estimation = _read(read_series, est_path, cfg.grid) if est_path.is_file() else {}
    _prepare_out(out)

    def final_of(prefix):
        def keep(sid):
            q, src, stage = _split_id(sid)
            return q.startswith(prefix) and stage is None

        return keep

    files = {
        "plot_flow.csv": _family(series, final_of("q")),
        "plot_matching.csv": _family(series, final_of("match")),
        "plot_travel_time.csv": _family(series, final_of("tau")),
    }
    routes = sorted({int(sid.split(".")[0][1:]) for sid in estimation})
    show = cfg.analysis.get("showcase_route")
    chosen = show if show in routes else (routes[0] if routes else None)
    overlay = {}
    if chosen is not None:
        cand = {lbl: estimation[f"r{chosen}.{lbl}"] for lbl in OVERLAY_IDS}
        if any(s.mask.any() for s in cand.values()):
            overlay = cand
    files["plot_estimation.csv"] = overlay
    for name, fam in files.items():
        write_series(fam, out / name)
    _manifest(out, "plotdata", cfg, args, [(name, "series") for name in files])
    print(f"plot data -> {', '.join(files)}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "derive": cmd_derive,
    "assess": cmd_assess,
    "estimate": cmd_estimate,
    "plotdata": cmd_plotdata,
}


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (default: run directory's scenario.json, or the shipped default for simulate)")
    common.add_argument("--seed", type=_nonneg_int, help="override the scenario seed")
    common.add_argument("--out", default="run", help="run directory (default: %(default)s)")
    common.add_argument("--k", type=_nonneg_int, default=DEFAULT_K, help="smoothing window k (default: %(default)s)")
    common.add_argument("--probe-rate", type=_prob, help="override the probe sampling rate")

    parser = argparse.ArgumentParser(prog="urbantse", description="Urban traffic state estimation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="generate ground truth, loop and phase logs")
    sub.add_parser("derive", parents=[common], help="emulate sensors and derive flow / travel-time series")
    sub.add_parser("assess", parents=[common], help="score each source against ground truth")
    est = sub.add_parser("estimate", parents=[common], help="fit baseline and final regression models")
    est.add_argument("--route", type=int, action="append", help="route to estimate (repeatable; default: showcase route)")
    sub.add_parser("plotdata", parents=[common], help="write long-format plot data")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not hasattr(args, "route"):
        args.route = None
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
