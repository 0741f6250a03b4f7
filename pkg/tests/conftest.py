import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from urbantse.core import IntervalGrid, Route, Spot  # noqa: E402
from urbantse.simnet import DemandProfile, DetectorConfig, ScenarioConfig, SignalPlan  # noqa: E402

ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}

PERFECT_SENSORS = {
    "count_detect_prob": 1.0,
    "plate_recog_schedule": {"default": [[0, 1.0]]},
    "mac_penetration": 1.0,
    "mac_smoothing_k": 0,
    "probe_rate": 1.0,
    "aggregate_bias": 1.0,
    "aggregate_ema_alpha": 1.0,
}


def small_config(rate=600.0, horizon=1800.0, seed=0, cycle=60.0, green=30.0, fft=40.0, sensors=None):
    """Two routes sharing an entry spot, one controller each."""
    grid = IntervalGrid(0.0, horizon, 60.0)
    spots = (Spot(1, "WB"), Spot(2, "EB"), Spot(3, "NB"))
    routes = (Route(1, 1, 2, fft), Route(2, 1, 3, fft + 20.0))
    return ScenarioConfig(
        grid=grid,
        spots=spots,
        routes=routes,
        demand={1: DemandProfile.constant(rate, grid), 2: DemandProfile.constant(rate / 3, grid)},
        signals=(
            SignalPlan("A", cycle, green, 0.0, (1,), 2.0),
            SignalPlan("B", cycle, green, 15.0, (2,), 2.0),
        ),
        detectors=(DetectorConfig("D1a", 1, 0.0, 0.6), DetectorConfig("D1b", 1, 0.5, 0.5), DetectorConfig("D2a", 2, 0.0, 0.6)),
        sensors=sensors or {},
        analysis={"assessed_routes": [1, 2], "showcase_route": 1},
        seed=seed,
    )


@pytest.fixture
def small():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        verdict, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {detail}")
