"""Multiple linear regression travel-time estimator.

Response and selected predictors are log transformed (``log(x + 0.1)`` for
predictors, plain ``log`` for the travel-time response).  Models are fitted
by ordinary least squares on the chronologically first 70 % of the usable
intervals and scored on the rest.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .core import IntervalGrid, SampledSeries, Unit, bin_counts, interval_of
from .metrics import mape, r2_and_adj
from .simnet import GREEN, RED, DetectorConfig, LoopRecord, PhaseLog, ScenarioConfig

LOG_EPS = 0.1
SOURCES = ("probe_tt", "headway_green", "progressed_flow", "avg_occupancy", "phase_count")
INTERCEPT = "(intercept)"
MODEL_HEADER = ["route_id", "feature", "coefficient", "transform"]
EXPERIMENT_HEADER = ["route_id", "row", "adj_r2", "mape_pct"]

# relative pivot size below which a column counts as linearly dependent
RANK_RTOL = 1e-10


class RankDeficiencyError(ValueError):
    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {', '.join(self.columns)}")


class InsufficientDataError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    source: str
    transform: str = "none"
    window: int = 1
    detector_ids: tuple[str, ...] = ()
    controller_id: str | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown feature source {self.source!r}")
        if self.transform not in ("none", "log"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.window < 1:
            raise ValueError("aggregation window must cover at least one interval")
        object.__setattr__(self, "detector_ids", tuple(self.detector_ids))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Named, already-transformed predictor columns; NaN marks a missing value."""

    grid: IntervalGrid
    columns: Mapping[str, np.ndarray]
    transforms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        cols = {}
        for name, col in self.columns.items():
            arr = np.array(col, dtype=float)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"column {name} has shape {arr.shape}, expected ({self.grid.n},)")
            if np.isinf(arr).any():
                raise ValueError(f"column {name} contains infinities")
            arr.setflags(write=False)
            cols[name] = arr
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "transforms", {n: self.transforms.get(n, "none") for n in cols})

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def missing_mask(self) -> np.ndarray:
        if not self.columns:
            return np.zeros((self.grid.n, 0), dtype=bool)
        return np.column_stack([np.isnan(c) for c in self.columns.values()])

    def array(self, names: Sequence[str]) -> np.ndarray:
        try:
            cols = [self.columns[n] for n in names]
        except KeyError as exc:
            raise ConfigurationError(f"unknown feature {exc.args[0]!r}") from None
        return np.column_stack(cols) if cols else np.empty((self.grid.n, 0))

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        self.array(names)
        return FeatureMatrix(self.grid, {n: self.columns[n] for n in names}, self.transforms)

    def imputed(self, means: Mapping[str, float]) -> "FeatureMatrix":
        cols = {n: np.where(np.isnan(c), means[n], c) for n, c in self.columns.items()}
        return FeatureMatrix(self.grid, cols, self.transforms)


def log_transform(x):
    return np.log(np.asarray(x, dtype=float) + LOG_EPS)


# -- feature extraction -------------------------------------------------------


def _window_mean(per_interval: np.ndarray, window: int) -> np.ndarray:
    out = np.full(len(per_interval), np.nan)
    for t in range(len(per_interval)):
        w = per_interval[max(0, t - window + 1) : t + 1]
        w = w[~np.isnan(w)]
        if len(w):
            out[t] = w.mean()
    return out


def _pooled_mean(sums: np.ndarray, counts: np.ndarray, window: int) -> np.ndarray:
    """Mean of all events in the trailing window (not a mean of interval means)."""
    out = np.full(len(sums), np.nan)
    for t in range(len(sums)):
        lo = max(0, t - window + 1)
        c = counts[lo : t + 1].sum()
        if c:
            out[t] = sums[lo : t + 1].sum() / c
    return out


def _loop_matrix(loops: Sequence[LoopRecord], det_ids: Sequence[str], grid: IntervalGrid, attr: str) -> np.ndarray:
    idx = {d: j for j, d in enumerate(det_ids)}
    mat = np.full((grid.n, len(det_ids)), np.nan)
    for rec in loops:
        j = idx.get(rec.detector_id)
        if j is not None and 0 <= rec.interval < grid.n:
            mat[rec.interval, j] = getattr(rec, attr)
    return mat


def green_headways(actuations: np.ndarray, phase: PhaseLog, grid: IntervalGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval (sum, count) of gaps between consecutive actuations in one green period.

    A gap is attributed to the interval of its later actuation.
    """
    sums = np.zeros(grid.n)
    counts = np.zeros(grid.n, dtype=np.int64)
    periods = phase.green_periods(grid.end)
    starts = np.array([p[0] for p in periods])
    acts = np.asarray(actuations, dtype=float)
    # green period index per actuation, -1 when it falls in red
    which = np.full(len(acts), -1)
    for i, t in enumerate(acts):
        j = int(np.searchsorted(starts, t, side="right")) - 1
        if j >= 0 and t < periods[j][1]:
            which[i] = j
    for i in range(1, len(acts)):
        if which[i] >= 0 and which[i] == which[i - 1] and grid.contains(acts[i]):
            k = interval_of(grid, acts[i])
            sums[k] += acts[i] - acts[i - 1]
            counts[k] += 1
    return sums, counts


def extract_features(
    loops: Sequence[LoopRecord],
    phases: Mapping[str, PhaseLog] | Sequence[PhaseLog],
    probe_tt,
    grid: IntervalGrid,
    specs: Sequence[FeatureSpec],
    actuations: Mapping[str, np.ndarray] | None = None,
) -> FeatureMatrix:
    """Build the predictor matrix described by ``specs``.

    ``probe_tt`` holds the probe vehicles of the route (traces or matched
    pairs); ``actuations`` maps detector id to crossing instants and is only
    needed for ``headway_green``.
    """
    if not isinstance(phases, Mapping):
        phases = {p.controller_id: p for p in phases}
    cols, transforms = {}, {}
    for spec in specs:
        if spec.source == "probe_tt":
            sums = np.zeros(grid.n)
            counts = np.zeros(grid.n, dtype=np.int64)
            for rec in probe_tt:
                if rec.t_out >= rec.t_in and grid.contains(rec.t_out):
                    i = interval_of(grid, rec.t_out)
                    sums[i] += rec.t_out - rec.t_in
                    counts[i] += 1
            raw = _pooled_mean(sums, counts, spec.window)
        elif spec.source == "headway_green":
            if actuations is None:
                raise ConfigurationError(f"{spec.name}: headway features need detector actuations")
            sums = np.zeros(grid.n)
            counts = np.zeros(grid.n, dtype=np.int64)
            for det in spec.detector_ids:
                s, c = green_headways(actuations[det], _phase(phases, spec), grid)
                sums += s
                counts += c
            raw = _pooled_mean(sums, counts, spec.window)
        elif spec.source == "progressed_flow":
            mat = _loop_matrix(loops, spec.detector_ids, grid, "count")
            raw = _window_mean(np.nansum(mat, axis=1) * (3600.0 / grid.T), spec.window)
        elif spec.source == "avg_occupancy":
            mat = _loop_matrix(loops, spec.detector_ids, grid, "occupancy")
            with np.errstate(all="ignore"):
                per = np.where(np.isnan(mat).all(axis=1), np.nan, np.nanmean(np.where(np.isnan(mat), 0, mat), axis=1))
            raw = _window_mean(per, spec.window)
        else:  # phase_count
            onsets = [t for t, _ in _phase(phases, spec).onsets()]
            raw = _window_mean(bin_counts(grid, onsets).astype(float), spec.window)
        cols[spec.name] = log_transform(raw) if spec.transform == "log" else raw
        transforms[spec.name] = spec.transform
    return FeatureMatrix(grid, cols, transforms)


def _phase(phases: Mapping[str, PhaseLog], spec: FeatureSpec) -> PhaseLog:
    try:
        return phases[spec.controller_id]
    except KeyError:
        raise ConfigurationError(f"{spec.name}: no phase log for controller {spec.controller_id!r}") from None


def default_feature_specs(config: ScenarioConfig, route_id: int, window: int = 11) -> list[FeatureSpec]:
    """Probe predictor followed by the loop/signal candidates of one route, in declared order."""
    ctrl = config.controller_of(route_id).controller_id
    dets = config.detectors_of(route_id)
    stop = tuple(d.detector_id for d in dets if d.is_stop_bar)
    every = tuple(d.detector_id for d in dets)
    return [
        FeatureSpec("probe_tt", "probe_tt", "log", window),
        FeatureSpec("headway_green", "headway_green", "log", window, stop, ctrl),
        FeatureSpec("progressed_flow", "progressed_flow", "none", window, stop),
        FeatureSpec("avg_occupancy", "avg_occupancy", "none", window, every),
        FeatureSpec("phase_count", "phase_count", "log", window, (), ctrl),
    ]


# -- fitting ------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionModel:
    route_id: int
    intercept: float
    coefficients: tuple[float, ...]
    features: tuple[str, ...]
    response_transform: str = "log"
    feature_transforms: tuple[str, ...] = ()
    residual_std: float = 0.0
    r2: float | None = None
    adj_r2: float | None = None
    n: int = 0
    steps: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if len(self.coefficients) != len(self.features):
            raise ValueError("one coefficient per selected feature required")
        if self.residual_std < 0:
            raise ValueError("residual std must be >= 0")
        if not self.feature_transforms:
            object.__setattr__(self, "feature_transforms", ("none",) * len(self.features))

    @property
    def p(self) -> int:
        return len(self.features)

    @property
    def coef(self) -> dict[str, float]:
        return dict(zip(self.features, self.coefficients))


def _as_design(X, features: Sequence[str] | None) -> tuple[np.ndarray, list[str], dict]:
    if isinstance(X, FeatureMatrix):
        names = list(features) if features is not None else X.names
        return X.array(names), names, {n: X.transforms.get(n, "none") for n in names}
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    names = list(features) if features is not None else [f"x{j + 1}" for j in range(arr.shape[1])]
    return arr, names, {}


def _flat(A: np.ndarray) -> np.ndarray:
    """Per column: True when its spread is round-off relative to its magnitude."""
    spread = np.linalg.norm(A - A.mean(axis=0), axis=0)
    return spread <= RANK_RTOL * np.maximum(np.linalg.norm(A, axis=0), 1e-300) * math.sqrt(len(A))


def fit_ols(
    X,
    y,
    features: Sequence[str] | None = None,
    route_id: int = 0,
    response_transform: str = "none",
) -> RegressionModel:
    """Least-squares fit with intercept via column-pivoted QR.

    ``X`` is a :class:`FeatureMatrix` or a 2-D array, ``y`` the response
    already in transformed space.  Rows with any missing value are dropped.
    Predictors are centred first so the intercept never competes in the
    pivoting; a predictor that is constant or a combination of others raises
    :class:`RankDeficiencyError` naming it.
    """
    A, names, transforms = _as_design(X, features)
    y = np.asarray(y.values if isinstance(y, SampledSeries) else y, dtype=float)
    if A.shape[0] != len(y):
        raise ValueError(f"X has {A.shape[0]} rows but y has {len(y)}")
    rows = ~np.isnan(y) & ~np.isnan(A).any(axis=1)
    A, yv = A[rows], y[rows]
    n, p = A.shape
    if n <= p + 1:
        raise InsufficientDataError(f"need more than p + 1 = {p + 1} complete rows, got {n}")
    x_mean, y_mean = A.mean(axis=0), yv.mean()
    Ac, yc = A - x_mean, yv - y_mean
    beta = np.zeros(p)
    if p:
        norms = np.linalg.norm(Ac, axis=0)
        dead = [names[j] for j in np.flatnonzero(_flat(A))]
        if dead:
            raise RankDeficiencyError(dead)
        As = Ac / norms
        Q, R, piv = scipy.linalg.qr(As, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int((diag > RANK_RTOL * max(n, p) * diag[0]).sum())
        if rank < p:
            raise RankDeficiencyError([names[j] for j in piv[rank:]])
        z = scipy.linalg.solve_triangular(R, Q.T @ yc)
        beta[piv] = z
        beta /= norms
    intercept = float(y_mean - x_mean @ beta)
    fitted = intercept + A @ beta
    resid = yv - fitted
    dof = n - p - 1
    r2, adj = r2_and_adj(yv, fitted, p)
    return RegressionModel(
        route_id=route_id,
        intercept=intercept,
        coefficients=tuple(float(b) for b in beta),
        features=tuple(names),
        response_transform=response_transform,
        feature_transforms=tuple(transforms.get(nm, "none") for nm in names),
        residual_std=float(math.sqrt((resid @ resid) / dof)),
        r2=r2,
        adj_r2=adj,
        n=n,
    )


def predict_transformed(model: RegressionModel, X) -> np.ndarray:
    """Linear predictor in the response's transformed space; NaN where a feature is missing."""
    A, _, _ = _as_design(X, model.features)
    return model.intercept + A @ np.asarray(model.coefficients)


def predict(model: RegressionModel, X: FeatureMatrix) -> SampledSeries:
    eta = predict_transformed(model, X)
    out = np.exp(eta) if model.response_transform == "log" else eta
    unit = Unit.SECONDS if model.response_transform == "log" else Unit.DIMENSIONLESS
    return SampledSeries(X.grid, out, unit)


def forward_select(
    candidates: FeatureMatrix,
    y,
    mandatory: str | None = "probe_tt",
    route_id: int = 0,
    response_transform: str = "log",
    min_gain: float = 0.0,
) -> RegressionModel:
    """Greedy forward selection on adjusted R².

    Starts from the mandatory predictor (the baseline) and repeatedly adds the
    candidate with the largest adjR² gain, scanning candidates in declared
    order so the earlier one wins ties.  Stops when no candidate improves
    adjR² by more than ``min_gain``.  Candidates that would make the design
    rank deficient are skipped.  All fits share the rows that are complete
    across every candidate.
    """
    y = np.asarray(y.values if isinstance(y, SampledSeries) else y, dtype=float)
    rows = ~np.isnan(y) & ~candidates.missing_mask.any(axis=1)
    y_common = np.where(rows, y, np.nan)

    def fit(names):
        return fit_ols(candidates, y_common, names, route_id, response_transform)

    selected = [mandatory] if mandatory else []
    best = fit(selected)
    current = best.adj_r2 if best.adj_r2 is not None else -math.inf
    steps = [(mandatory or INTERCEPT, current)]
    remaining = [n for n in candidates.names if n not in selected]
    while remaining:
        choice, choice_model, choice_adj = None, None, -math.inf
        for name in remaining:
            try:
                m = fit(selected + [name])
            except (RankDeficiencyError, InsufficientDataError):
                continue
            adj = m.adj_r2 if m.adj_r2 is not None else -math.inf
            if adj > choice_adj:
                choice, choice_model, choice_adj = name, m, adj
        if choice is None or not choice_adj - current > min_gain:
            break
        selected.append(choice)
        remaining.remove(choice)
        best, current = choice_model, choice_adj
        steps.append((choice, current))
    return _with_steps(best, steps)


def _with_steps(model: RegressionModel, steps) -> RegressionModel:
    return replace(model, steps=tuple(steps))


# -- experiment ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    order: str = "chronological"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train fraction must lie in (0, 1)")
        if self.order != "chronological":
            raise ValueError("only chronological splits are supported")

    def boundary(self, n: int) -> int:
        """Number of training rows for ``n`` usable rows."""
        return int(math.floor(n * self.train_fraction + 1e-9))


@dataclass(frozen=True)
class ExperimentRow:
    label: str
    adj_r2: float | None
    mape_pct: float | None


@dataclass(frozen=True)
class ExperimentResult:
    route_id: int
    rows: tuple[ExperimentRow, ...]
    baseline: RegressionModel
    final: RegressionModel
    truth: SampledSeries
    sample: SampledSeries
    base_estimate: SampledSeries
    final_estimate: SampledSeries
    n_train: int
    n_test: int

    def row(self, label: str) -> ExperimentRow:
        return next(r for r in self.rows if r.label == label)

    def mape_triple(self) -> tuple[float | None, float | None, float | None]:
        return tuple(self.row(lbl).mape_pct for lbl in ("sample", "base", "final"))


def run_experiment(
    truth: SampledSeries,
    features: FeatureMatrix,
    sample: SampledSeries,
    route_id: int = 0,
    split: SplitSpec = SplitSpec(),
    mandatory: str = "probe_tt",
) -> ExperimentResult:
    """Fit baseline and forward-selected models and score them on the held-out tail.

    ``truth`` is the smoothed ground-truth travel time (the response before
    the log), ``features`` the transformed predictors including the mandatory
    probe column, and ``sample`` the un-modelled probe travel-time series.
    Missing predictor values are replaced by their training-split mean.
    """
    grid = truth.grid
    usable = np.flatnonzero(truth.mask)
    n = len(usable)
    n_train = split.boundary(n)
    train, test = usable[:n_train], usable[n_train:]
    if mandatory not in features.columns:
        raise ConfigurationError(f"mandatory predictor {mandatory!r} missing from features")
    means, keep = {}, []
    for name, col in features.columns.items():
        vals = col[train]
        vals = vals[~np.isnan(vals)]
        if len(vals):
            means[name] = float(vals.mean())
            keep.append(name)
        elif name == mandatory:
            raise InsufficientDataError(f"route {route_id}: no {mandatory} observation in training split")
    X = features.select(keep).imputed(means)
    if n_train < len(keep) + 2 or n_train < 3:
        raise InsufficientDataError(f"route {route_id}: only {n_train} training rows")
    y = np.log(truth.values)
    tr_mask = np.zeros(grid.n, dtype=bool)
    tr_mask[train] = True
    y_train = np.where(tr_mask, y, np.nan)

    if _flat(X.columns[mandatory][train][:, None])[0]:
        # a constant probe column carries no information; its slope is pinned to zero
        rest = X.select([n for n in X.names if n != mandatory])
        baseline = _pin_zero(fit_ols(rest, y_train, [], route_id, "log"), mandatory, X)
        final = _pin_zero(forward_select(rest, y_train, None, route_id, "log"), mandatory, X)
    else:
        baseline = fit_ols(X, y_train, [mandatory], route_id, "log")
        final = forward_select(X, y_train, mandatory, route_id, "log")

    def on_usable(series_vals):
        out = np.full(grid.n, np.nan)
        out[usable] = series_vals[usable]
        return SampledSeries(grid, out, Unit.SECONDS)

    base_est = on_usable(predict(baseline, X).values)
    final_est = on_usable(predict(final, X).values)

    def test_mape(est: SampledSeries):
        t = np.full(grid.n, np.nan)
        t[test] = truth.values[test]
        return mape(t, est.values)

    rows = (
        ExperimentRow("sample", None, test_mape(sample)),
        ExperimentRow("base", baseline.adj_r2, test_mape(base_est)),
        ExperimentRow("final", final.adj_r2, test_mape(final_est)),
    )
    return ExperimentResult(route_id, rows, baseline, final, truth, sample, base_est, final_est, len(train), len(test))


def _pin_zero(model: RegressionModel, name: str, X: FeatureMatrix) -> RegressionModel:
    return replace(
        model,
        features=(name,) + model.features,
        coefficients=(0.0,) + model.coefficients,
        feature_transforms=(X.transforms.get(name, "none"),) + model.feature_transforms,
    )


def probe_sample_series(probe_tt, grid: IntervalGrid, window: int = 1) -> SampledSeries:
    """Mean probe travel time per interval (or per trailing ``window``), the un-modelled sample estimate."""
    fm = extract_features([], {}, probe_tt, grid, [FeatureSpec("s", "probe_tt", "none", window)])
    return SampledSeries(grid, fm.columns["s"], Unit.SECONDS)


# -- files ----------------------------------------------------------------------


def _fmt(v) -> str:
    return "NA" if v is None else repr(float(v))


def write_models(models: Sequence[RegressionModel], path) -> None:
    """model.csv; the intercept row's transform column carries the response transform."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MODEL_HEADER)
        for m in models:
            w.writerow([m.route_id, INTERCEPT, _fmt(m.intercept), m.response_transform])
            for name, b, tf in zip(m.features, m.coefficients, m.feature_transforms):
                w.writerow([m.route_id, name, _fmt(b), tf])


def read_models(path) -> list[RegressionModel]:
    from .io import ParseError

    acc: dict[int, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != MODEL_HEADER:
            raise ParseError(path, 1, "bad model.csv header")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rid, name, coef, tf = rec
                rid, coef = int(rid), float(coef)
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            m = acc.setdefault(rid, {"intercept": 0.0, "resp": "none", "f": [], "b": [], "t": []})
            if name == INTERCEPT:
                m["intercept"], m["resp"] = coef, tf
            else:
                m["f"].append(name)
                m["b"].append(coef)
                m["t"].append(tf)
    return [
        RegressionModel(rid, m["intercept"], tuple(m["b"]), tuple(m["f"]), m["resp"], tuple(m["t"]))
        for rid, m in acc.items()
    ]


def write_experiment_report(results: Sequence[ExperimentResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXPERIMENT_HEADER)
        for res in results:
            for row in res.rows:
                w.writerow([res.route_id, row.label, _fmt(row.adj_r2), _fmt(row.mape_pct)])


def format_experiment(res: ExperimentResult) -> str:
    def cell(v):
        return "-" if v is None else f"{v:.2f}"

    lines = [f"r{res.route_id:<10} {'adjR2':>7} {'MAPE%':>8}"]
    for label, row in zip(("raw sample", "baseline", "final"), res.rows):
        lines.append(f"{label:<11} {cell(row.adj_r2):>7} {cell(row.mape_pct):>8}")
    return "\n".join(lines)


def route_experiment(
    config: ScenarioConfig,
    traces,
    loops: Sequence[LoopRecord],
    phases: Sequence[PhaseLog],
    route_id: int,
    params=None,
    k: int = 10,
    split: SplitSpec = SplitSpec(),
    seed: int | None = None,
) -> ExperimentResult:
    """End-to-end estimation experiment for one route of a simulated scenario.

    The response is the k-interval weighted moving average of the true
    travel time; predictors aggregate over the same ``k + 1`` intervals.
    """
    from .pipeline import flow_series, moving_average, travel_time_series, weighted_moving_average
    from .sensors import SensorParams, emulate_probe_sample
    from .simnet import detector_actuations

    params = params or SensorParams.from_dict(config.sensors)
    seed = config.seed if seed is None else seed
    grid = config.grid
    route = config.route(route_id)
    weight = moving_average(flow_series(traces, route.entry_spot, grid, config.routes), k)
    truth = weighted_moving_average(travel_time_series(traces, route_id, grid), weight, k)
    probe = [tr for tr in emulate_probe_sample(traces, params, seed) if tr.route_id == route_id]
    specs = default_feature_specs(config, route_id, window=k + 1)
    acts = detector_actuations(traces, config.detectors, config.routes)
    X = extract_features(loops, phases, probe, grid, specs, acts)
    sample = probe_sample_series(probe, grid)
    return run_experiment(truth, X, sample, route_id, split)
