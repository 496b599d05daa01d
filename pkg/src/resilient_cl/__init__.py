"""Fault-tolerant cooperative localization for robot swarms.

Typical use::

    from resilient_cl import load_config, run
    result = run(load_config("paper_baseline"))
    print(result.terminal_msle(), result.comm_rate)
"""

from .config import ConfigError, load_config
from .filters import CKF, EKF, UKF, Estimate, FilterDivergenceError
from .sim import RunResult, ScenarioConfig, StepRecord, msle, run, run_sweep

__all__ = [
    "CKF",
    "EKF",
    "UKF",
    "ConfigError",
    "Estimate",
    "FilterDivergenceError",
    "RunResult",
    "ScenarioConfig",
    "StepRecord",
    "load_config",
    "msle",
    "run",
    "run_sweep",
]
__version__ = "0.1.0"
