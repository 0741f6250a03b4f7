"""Urban traffic state estimation toolkit.

Synthetic signalized-area ground truth, emulated heterogeneous sensors,
flow and travel-time derivation, assessment against ground truth, and a
regression travel-time estimator fed by loop, signal and probe data.
"""

__version__ = "0.1.0"

from .core import MISSING, IntervalGrid, SampledSeries, Unit, VehicleTrace
from .simnet import ScenarioConfig, default_config, simulate

__all__ = [
    "MISSING",
    "IntervalGrid",
    "SampledSeries",
    "ScenarioConfig",
    "Unit",
    "VehicleTrace",
    "default_config",
    "simulate",
    "__version__",
]
