"""Energy/performance toolkit for a duty-cycled multi-modal sensing node."""

from .dutycycle import Mode, SamplingPolicy, Workload, simulate
from .energy import Battery, ModelConfig, SensorSuite
from .scenario_io import load_calibration, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Battery",
    "Mode",
    "ModelConfig",
    "SamplingPolicy",
    "SensorSuite",
    "Workload",
    "load_calibration",
    "load_scenario",
    "simulate",
]
