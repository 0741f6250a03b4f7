import math

import numpy as np
import pytest

import oracles
from urbantse.core import MISSING, IntervalGrid, SampledSeries, Unit
from urbantse.metrics import (
    AssessmentReport,
    ReportRow,
    assemble_report,
    format_table,
    mape,
    mape_detail,
    pcc,
    r2_and_adj,
)


def S(vals, unit=Unit.DIMENSIONLESS):
    return SampledSeries(IntervalGrid(0, 60 * len(vals), 60), [MISSING if v is None else v for v in vals], unit)


class TestPcc:
    def test_perfect(self):
        assert pcc([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_value(self):
        # covariance 4 over sqrt(5 * 5)
        assert pcc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_zero_std_is_na(self):
        assert pcc([5, 5, 5], [1, 2, 3]) is None
        assert pcc([1, 2, 3], [4, 4, 4]) is None

    def test_near_constant_within_tolerance_is_na(self):
        assert pcc([100.0, 100.0 + 1e-12, 100.0], [1, 2, 3]) is None

    def test_too_few_joint_samples(self):
        assert pcc(S([1.0, None, 3.0]), S([None, 2.0, None])) is None

    def test_missing_excluded(self):
        assert pcc(S([1, 2, None, 3]), S([2, 4, 100, 6])) == pytest.approx(1.0)

    def test_grid_mismatch(self):
        a = SampledSeries(IntervalGrid(0, 120, 60), [1, 2])
        b = SampledSeries(IntervalGrid(60, 120, 60), [1, 2])
        with pytest.raises(ValueError):
            pcc(a, b)
        with pytest.raises(ValueError):
            pcc([1, 2], [1, 2, 3])

    def test_oracle_random(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(3, 50))
            a, b = rng.normal(size=n), rng.normal(size=n) + rng.normal() * rng.normal(size=n)
            assert pcc(a, b) == pytest.approx(oracles.pearson(list(a), list(b)), abs=1e-12)


class TestMape:
    def test_examples(self):
        assert mape([1, 2], [1, 2]) == 0.0
        assert mape([100], [110]) == pytest.approx(10.0)
        assert mape([50, 200], [60, 180]) == pytest.approx(15.0)

    def test_zero_truth_excluded_and_counted(self):
        d = mape_detail([0, 100, 0], [5, 90, 0])
        assert d.value == pytest.approx(10.0)
        assert (d.n_used, d.n_zero_excluded) == (1, 2)

    def test_no_eligible(self):
        assert mape([0, 0], [1, 1]) is None
        assert mape(S([None, 1.0]), S([1.0, None])) is None


class TestR2:
    def test_perfect(self):
        y = np.arange(10.0)
        assert r2_and_adj(y, y, 2) == (1.0, 1.0)

    def test_plug_in(self):
        # build y, yhat with R^2 exactly 0.40 for n=100
        rng = np.random.default_rng(0)
        y = rng.normal(size=100)
        y -= y.mean()
        e = rng.normal(size=100)
        e -= e.mean()
        e -= (e @ y) / (y @ y) * y
        e *= math.sqrt(0.6 * (y @ y) / (e @ e))
        r2, adj = r2_and_adj(y, y + e, 1)
        assert r2 == pytest.approx(0.40)
        assert adj == pytest.approx(1 - 0.6 * 99 / 98)
        assert adj == pytest.approx(0.3939, abs=1e-4)

    def test_constant_truth(self):
        assert r2_and_adj([3, 3, 3, 3], [1, 2, 3, 4], 1) == (None, None)

    def test_insufficient(self):
        with pytest.raises(ValueError):
            r2_and_adj([1, 2, 3], [1, 2, 3], 2)


class TestReport:
    def _quantities(self):
        gt = S([10, 20, 30, 40], Unit.VEH_PER_H)
        return {
            "tau3": {"GT": S([90, 95, 100, 92], Unit.SECONDS), "G": S([100, 100, 100, 100], Unit.SECONDS), "LP": S([90, 95, 100, 92], Unit.SECONDS)},
            "q10": {"GT": gt, "TC": gt, "LP": gt},
            "q2": {"GT": gt, "TC": S([12, 18, 33, 40], Unit.VEH_PER_H)},
        }

    def test_row_order_and_na(self):
        rep = assemble_report(self._quantities(), {("q10", "LP"): 0.7})
        keys = [(r.quantity, r.source) for r in rep.rows]
        assert keys == [("q2", "TC"), ("q10", "LP"), ("q10", "TC"), ("tau3", "LP"), ("tau3", "G")]
        assert rep.get("tau3", "G").rho is None
        assert rep.get("q10", "LP").match_rate_pct == pytest.approx(70.0)
        assert rep.get("q10", "TC").rho == pytest.approx(1.0) and rep.get("q10", "TC").mape_pct == 0.0
        assert rep.metadata["mape_zero_truth_rule"] == "excluded"
        table = format_table(rep)
        assert "NA" in table and table.splitlines()[1].startswith("q2")

    def test_row_invariants(self):
        with pytest.raises(ValueError):
            ReportRow("q1", "LP", 1.5, 0.0, None, 3)
        with pytest.raises(ValueError):
            ReportRow("q1", "LP", 0.5, -1.0, None, 3)

    def test_missing_key(self):
        with pytest.raises(KeyError):
            AssessmentReport().get("q1", "LP")
