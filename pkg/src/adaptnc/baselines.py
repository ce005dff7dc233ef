"""Comparison runners that share the StepRecord contract of ``adaptive.run``."""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Iterable

from . import adaptive
from .adaptive import AdaptncConfig, RunResult, StepRecord
from .core import Observation
from .errors import InsufficientCalibration, InsufficientHistory, InvalidInput


class BaselineKind(str, enum.Enum):
    SPLIT_CP = "split_cp"
    DTACI_FIXED = "dtaci_fixed"
    ADAPTNC_NO_REPLAY = "adaptnc_no_replay"
    ADAPTNC = "adaptnc"


METHODS = tuple(k.value for k in BaselineKind)


def split_quantile(scores, alpha: float) -> float:
    """Finite-sample split-conformal threshold, the ``ceil((n+1)(1-alpha))``-th score."""
    n = len(scores)
    k = math.ceil((n + 1) * (1 - alpha) - 1e-9)
    if k > n:
        raise InsufficientCalibration(
            f"{n} calibration scores cannot certify 1 - alpha = {1 - alpha:g} (need rank {k})"
        )
    return float(sorted(scores)[k - 1])


def split_cp_run(stream: Iterable[Observation], config: AdaptncConfig = AdaptncConfig()) -> RunResult:
    it = iter(stream)
    cal = [obs for _, obs in zip(range(config.calibration_size), it)]
    if len(cal) < config.calibration_size:
        raise InsufficientHistory("stream shorter than the calibration prefix")
    res = [obs.residual for obs in cal]
    theta = adaptive.optimize_score(
        res, None, config.target_alpha, config.mckde, adaptive._rng_seed(config.seed, 0)
    )
    q = split_quantile(list(theta.score(res)), config.target_alpha)
    vol = theta.area(q)
    records = []
    thetas = []
    for obs in it:
        if not thetas:
            thetas.append((obs.t, theta))
        s = float(theta.score(obs.residual))
        records.append(StepRecord(obs.t, config.target_alpha, q, s <= q, vol, False, (), 0))
    return RunResult(records, thetas, ())


def dtaci_fixed_run(stream, config: AdaptncConfig = AdaptncConfig()) -> RunResult:
    return adaptive.run(stream, dataclasses.replace(config, adapt_interval=None))


def no_replay_run(stream, config: AdaptncConfig = AdaptncConfig()) -> RunResult:
    return adaptive.run(stream, dataclasses.replace(config, replay=False))


def adaptnc_run(stream, config: AdaptncConfig = AdaptncConfig()) -> RunResult:
    return adaptive.run(stream, dataclasses.replace(config, replay=True))


RUNNERS = {
    BaselineKind.SPLIT_CP.value: split_cp_run,
    BaselineKind.DTACI_FIXED.value: dtaci_fixed_run,
    BaselineKind.ADAPTNC_NO_REPLAY.value: no_replay_run,
    BaselineKind.ADAPTNC.value: adaptnc_run,
}


def run_method(method: str, stream, config: AdaptncConfig = AdaptncConfig()) -> RunResult:
    try:
        runner = RUNNERS[BaselineKind(method).value]
    except ValueError:
        raise InvalidInput(f"unknown method {method!r}; choose from {METHODS}") from None
    return runner(stream, config)
