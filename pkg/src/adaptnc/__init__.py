"""Online conformal prediction with jointly adapted score geometry and threshold."""

from .adaptive import AdaptncConfig, MckdeConfig, RunResult, StepRecord, optimize_score, run
from .baselines import METHODS, BaselineKind, run_method
from .core import Observation, PolytopeScore, PredictionRegion, RollingWindow
from .metrics import RunSummary, summarize

__version__ = "0.1.0"

__all__ = [
    "AdaptncConfig",
    "BaselineKind",
    "METHODS",
    "MckdeConfig",
    "Observation",
    "PolytopeScore",
    "PredictionRegion",
    "RollingWindow",
    "RunResult",
    "RunSummary",
    "StepRecord",
    "optimize_score",
    "run",
    "run_method",
    "summarize",
]
