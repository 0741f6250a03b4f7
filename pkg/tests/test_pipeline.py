import math
from collections import Counter

import numpy as np
import pytest

import oracles
from urbantse.core import MISSING, DetectionSet, IntervalGrid, Route, SampledSeries, Sighting, Unit, VehicleTrace
from urbantse.pipeline import (
    Derived,
    SmoothingSpec,
    derive,
    flow_series,
    moving_average,
    travel_time_series,
    weighted_moving_average,
)
from urbantse.sensors import MatchedPair, SensorParams, match_tokens
from urbantse.simnet import simulate

from conftest import small_config

G4 = IntervalGrid(0, 240, 60)


def ser(vals, unit=Unit.DIMENSIONLESS, grid=None):
    grid = grid or IntervalGrid(0, 60 * len(vals), 60)
    return SampledSeries(grid, [MISSING if v is None else v for v in vals], unit)


class TestFlow:
    def test_unit_scaling(self):
        ds = DetectionSet("TC", "count_only", tuple(Sighting(1, None, float(t)) for t in range(5)))
        q = flow_series(ds, 1, IntervalGrid(0, 120, 60))
        assert q.to_list() == [300.0, 0.0]
        assert q.unit is Unit.VEH_PER_H

    def test_counts_oracle(self):
        times = [1, 61, 62, 121, 122, 123]
        ds = DetectionSet("TC", "count_only", tuple(Sighting(1, None, float(t)) for t in times))
        assert flow_series(ds, 1, IntervalGrid(0, 180, 60)).to_list() == [60.0, 120.0, 180.0]

    def test_from_traces_needs_routes(self):
        with pytest.raises(ValueError):
            flow_series([VehicleTrace("a", 1, 0, 10)], 1, G4)

    def test_from_traces_counts_entry_and_exit(self):
        routes = [Route(1, 1, 2, 10.0)]
        traces = [VehicleTrace("a", 1, 5.0, 70.0)]
        assert flow_series(traces, 1, G4, routes).to_list() == [60.0, 0, 0, 0]
        assert flow_series(traces, 2, G4, routes).to_list() == [0, 60.0, 0, 0]


class TestMovingAverage:
    def test_hand_example(self):
        assert moving_average(ser([1, 2, 3, 4]), 1).to_list() == [None, 1.5, 2.5, 3.5]

    def test_identity_at_zero(self):
        s = ser([1.0, None, 3.0, 4.0])
        assert moving_average(s, 0) == s

    def test_constant(self):
        assert moving_average(ser([7.0] * 20), 5).to_list() == [None] * 5 + [7.0] * 15

    def test_missing_renormalizes(self):
        assert moving_average(ser([1.0, None, 3.0, None, None, None]), 2).to_list() == [None, None, 2.0, 3.0, 3.0, None]

    def test_negative_k(self):
        with pytest.raises(ValueError):
            moving_average(ser([1.0]), -1)
        with pytest.raises(ValueError):
            SmoothingSpec(k=-1)
        with pytest.raises(ValueError):
            SmoothingSpec(kind="EMA")

    def test_oracle_random(self):
        rng = np.random.default_rng(0)
        for _ in range(120):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(0, 12))
            vals = [None if rng.random() < 0.25 else float(rng.normal(50, 20)) for _ in range(n)]
            got = moving_average(ser(vals), k).to_list()
            want = oracles.moving_average(vals, k)
            assert [g is None for g in got] == [w is None for w in want]
            assert [g for g in got if g is not None] == pytest.approx([w for w in want if w is not None], rel=1e-12, abs=1e-9)


class TestWeightedMovingAverage:
    def test_hand_example(self):
        out = weighted_moving_average(ser([100, 200], Unit.SECONDS), ser([1, 3]), 1)
        assert out.to_list() == [None, 175.0]

    def test_constant_tt(self):
        out = weighted_moving_average(ser([80.0] * 6, Unit.SECONDS), ser([1, 5, 2, 9, 3, 4]), 2)
        assert out.to_list()[2:] == pytest.approx([80.0] * 4)

    def test_equal_weights_reduce_to_ma(self):
        tt = ser([10.0, None, 30.0, 40.0, 50.0, 20.0], Unit.SECONDS)
        assert weighted_moving_average(tt, ser([2.0] * 6), 2) == moving_average(tt, 2)

    def test_zero_weight_sum(self):
        out = weighted_moving_average(ser([10.0, 20.0], Unit.SECONDS), ser([0.0, 0.0]), 1)
        assert out.to_list() == [None, None]

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            weighted_moving_average(ser([1.0, 2.0]), ser([1.0, 2.0, 3.0]), 0)

    def test_oracle_random(self):
        rng = np.random.default_rng(1)
        for _ in range(120):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(0, 12))
            tau = [None if rng.random() < 0.3 else float(rng.uniform(30, 300)) for _ in range(n)]
            w = [None if rng.random() < 0.1 else float(rng.choice([0.0, rng.uniform(0, 900)])) for _ in range(n)]
            got = weighted_moving_average(ser(tau, Unit.SECONDS), ser(w), k).to_list()
            want = oracles.weighted_moving_average(tau, w, k)
            assert [g is None for g in got] == [x is None for x in want]
            assert [g for g in got if g is not None] == pytest.approx([x for x in want if x is not None], rel=1e-12)


class TestTravelTime:
    def test_single_vehicle(self):
        tt = travel_time_series([VehicleTrace("a", 1, 10.0, 70.0)], 1, G4)
        assert tt.to_list() == [None, 60.0, None, None]

    def test_mean_in_exit_interval(self):
        tt = travel_time_series([VehicleTrace("a", 1, 10, 70), VehicleTrace("b", 1, 20, 100)], 1, G4)
        assert tt.to_list()[1] == 70.0

    def test_entry_assignment_flag(self):
        tt = travel_time_series([VehicleTrace("a", 1, 10.0, 70.0)], 1, G4, assign="entry")
        assert tt.to_list() == [60.0, None, None, None]
        with pytest.raises(ValueError):
            travel_time_series([], 1, G4, assign="middle")

    def test_negative_duration_rejected_and_tallied(self):
        tally = Counter()
        recs = [MatchedPair("x", 1, 100.0, 50.0), MatchedPair("y", 1, 0.0, 30.0), MatchedPair("z", 1, 0.0, 500.0)]
        tt = travel_time_series(recs, 1, G4, tally=tally)
        assert tt.to_list() == [30.0, None, None, None]
        assert tally == Counter({"rejected_negative_duration": 1, "outside_horizon": 1})

    def test_other_routes_ignored(self):
        assert travel_time_series([VehicleTrace("a", 2, 0, 30)], 1, G4).n_missing() == 4

    def test_oracle_random(self):
        rng = np.random.default_rng(2)
        for _ in range(120):
            n = int(rng.integers(1, 30))
            grid = IntervalGrid(0, 60.0 * n, 60)
            recs = []
            for _ in range(int(rng.integers(0, 80))):
                t_in = float(rng.uniform(-100, grid.end))
                dur = float(rng.choice([rng.uniform(0, 400), -rng.uniform(0, 5), 0.0], p=[0.9, 0.05, 0.05]))
                recs.append((int(rng.integers(1, 3)), t_in, t_in + dur))
            pairs = [MatchedPair(f"t{i}", r, a, b) for i, (r, a, b) in enumerate(recs)]
            got = travel_time_series(pairs, 1, grid).to_list()
            want = oracles.travel_time(recs, 1, 0.0, 60.0, n)
            assert [g is None for g in got] == [w is None for w in want]
            assert [g for g in got if g is not None] == pytest.approx([w for w in want if w is not None], rel=1e-12)


class TestProperties:
    def test_shift_equivariance(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 100, 30)
        a = moving_average(ser(list(x)), 4).values
        b = moving_average(ser([0.0] + list(x[:-1])), 4).values
        assert a[4:-1] == pytest.approx(b[5:])

    def test_convex_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = rng.normal(0, 10, 25)
            w = rng.uniform(0, 5, 25)
            k = int(rng.integers(0, 6))
            ma = moving_average(ser(list(x)), k).values
            wma = weighted_moving_average(ser(list(x + 100), Unit.SECONDS), ser(list(w)), k).values
            for t in range(k, 25):
                win = x[t - k : t + 1]
                assert win.min() - 1e-12 <= ma[t] <= win.max() + 1e-12
                if not math.isnan(wma[t]):
                    assert win.min() + 100 - 1e-9 <= wma[t] <= win.max() + 100 + 1e-9


class TestDerive:
    def test_closure_with_perfect_sensors(self):
        cfg = small_config(rate=700, seed=2)
        res = simulate(cfg)
        d, dets = derive(res.traces, cfg.routes, [1, 2, 3], cfg.grid, SensorParams.perfect(), seed=2)
        assert isinstance(d, Derived)
        for s in (1, 2, 3):
            assert d.series[f"q{s}.LP.raw"] == d.series[f"q{s}.GT.raw"]
            assert d.series[f"q{s}.TC.raw"] == d.series[f"q{s}.GT.raw"]
        for r in (1, 2):
            gt = d.series[f"tau{r}.GT.raw"]
            assert d.series[f"tau{r}.LP.raw"] == gt
            assert d.series[f"tau{r}.TC.raw"] == gt
            assert d.series[f"tau{r}.G"] == d.series[f"tau{r}.GT"]
        assert set(dets) == {"TC", "LP", "TC-MAC"}
        assert len(match_tokens(dets["LP"], cfg.routes)) == sum(1 for t in res.traces if cfg.grid.contains(t.t_out))

    def test_series_ids_and_diagnostics(self):
        cfg = small_config(rate=500, seed=1)
        res = simulate(cfg)
        d, _ = derive(res.traces, cfg.routes, [1, 2, 3], cfg.grid, SensorParams(), seed=1, assessed_routes=[1])
        assert set(d.assessed("tau1")) == {"GT", "LP", "TC", "G"}
        assert set(d.assessed("q2")) == {"GT", "LP", "TC"}
        assert "tau2.GT" not in d.series
        assert d.diagnostics["missing.q1.GT"] == 10
        assert "match1.LP" in d.series

    def test_deterministic(self):
        cfg = small_config(seed=3)
        res = simulate(cfg)
        a, _ = derive(res.traces, cfg.routes, [1, 2, 3], cfg.grid, SensorParams(), seed=3)
        b, _ = derive(res.traces, cfg.routes, [1, 2, 3], cfg.grid, SensorParams(), seed=3)
        assert a.series.keys() == b.series.keys()
        assert all(a.series[k] == b.series[k] for k in a.series)
