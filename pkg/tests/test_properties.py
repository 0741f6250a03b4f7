"""Generated-input properties of the metric and smoothing functions."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from urbantse.core import IntervalGrid, SampledSeries, Unit
from urbantse.metrics import mape, pcc, r2_and_adj
from urbantse.pipeline import moving_average

CASES = settings(max_examples=250, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=0.5, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def pair(draw, elements=finite, min_size=3):
    n = draw(st.integers(min_size, 40))
    a = draw(st.lists(elements, min_size=n, max_size=n))
    b = draw(st.lists(elements, min_size=n, max_size=n))
    return np.array(a), np.array(b)


def _spread(x):
    return np.std(x) > 1e-6 * max(1.0, np.abs(x).max())


@CASES
@given(pair())
def test_pcc_symmetric(ab):
    a, b = ab
    r1, r2 = pcc(a, b), pcc(b, a)
    assert (r1 is None) == (r2 is None)
    if r1 is not None:
        assert math.isclose(r1, r2, abs_tol=1e-12)
        assert -1.0 <= r1 <= 1.0


@CASES
@given(pair(), st.floats(0.01, 100) | st.floats(-100, -0.01), st.floats(-100, 100))
def test_pcc_affine_invariance(ab, alpha, beta):
    a, b = ab
    if not (_spread(a) and _spread(b)):
        return
    r = pcc(a, b)
    r_t = pcc(a, alpha * b + beta)
    assert r is not None and r_t is not None
    assert math.isclose(r_t, math.copysign(1.0, alpha) * r, abs_tol=1e-7)


@CASES
@given(pair())
def test_pcc_self_correlation(ab):
    a, _ = ab
    if _spread(a):
        assert math.isclose(pcc(a, a), 1.0, abs_tol=1e-12)


@CASES
@given(pair(elements=positive), st.floats(0.001, 1000))
def test_mape_scale_invariant(ab, c):
    y, yhat = ab
    m1, m2 = mape(y, yhat), mape(c * y, c * yhat)
    assert m1 >= 0
    assert math.isclose(m1, m2, rel_tol=1e-9, abs_tol=1e-9)


@CASES
@given(st.integers(4, 60), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_adjusted_r2_not_above_r2(n, p, seed):
    if n < p + 2:
        return
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n)
    yhat = y + rng.normal(scale=rng.uniform(0, 2), size=n)
    r2, adj = r2_and_adj(y, yhat, p)
    assert adj <= r2 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.none(), finite), min_size=1, max_size=40), st.integers(0, 10))
def test_moving_average_within_window_range(vals, k):
    s = SampledSeries(IntervalGrid(0, 60 * len(vals), 60), [math.nan if v is None else v for v in vals], Unit.DIMENSIONLESS)
    out = moving_average(s, k).values
    for t in range(len(vals)):
        win = [v for v in vals[max(0, t - k) : t + 1] if v is not None]
        if t < k or not win:
            assert math.isnan(out[t])
        else:
            assert min(win) - 1e-9 <= out[t] <= max(win) + 1e-9
