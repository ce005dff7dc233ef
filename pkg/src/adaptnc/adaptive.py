"""Joint online adaptation of the score geometry and the conformal threshold.

The loop keeps a DtACI bank on top of a rolling score window. Every
``adapt_interval`` steps it refits the convex-hull score on the history,
weighted by how fast the experts currently think the distribution moves,
re-scores the window under the new hull and (optionally) replays the last
``window`` steps through a fresh bank so the threshold starts out
calibrated for the new score.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import dtaci
from .core import Observation, PolytopeScore, RollingWindow
from .density import mckde_hdr
from .errors import DegenerateInput, InsufficientHistory, InvalidInput
from .geometry import hull_to_polytope, quickhull

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MckdeConfig:
    m: int = 4000
    method: str = "scott"
    factor: float = 1.0
    scale_to_data: bool = True


@dataclass(frozen=True)
class AdaptncConfig:
    target_alpha: float = 0.1
    adapt_interval: int | None = 100
    window: int = 500
    gammas: tuple = dtaci.DEFAULT_GAMMAS
    eta: float | None = None
    sigma: float | None = None
    mckde: MckdeConfig = field(default_factory=MckdeConfig)
    replay: bool = True
    calibration_size: int = 500
    history_max: int | None = None
    min_history: int = 20
    seed: int = 0

    def validate(self) -> None:
        if not 0 < self.target_alpha < 1:
            raise InvalidInput("target_alpha must lie in (0, 1)")
        if self.adapt_interval is not None and self.adapt_interval < 1:
            raise InvalidInput("adapt_interval must be >= 1")
        if self.window < 10:
            raise InvalidInput("window must be >= 10")
        if self.calibration_size < self.min_history:
            raise InvalidInput("calibration_size must cover min_history")
        if self.history_max is not None and self.history_max < max(self.min_history, 2 * self.window):
            raise InvalidInput("history_max must hold at least two windows")
        if any(g >= 1 for g in self.gammas):
            raise InvalidInput("expert gammas must be < 1")
        self.fresh_bank()

    def fresh_bank(self) -> dtaci.ExpertBank:
        return dtaci.ExpertBank.fresh(
            self.gammas, self.target_alpha, self.eta, self.sigma, self.window
        )


@dataclass(frozen=True)
class StepRecord:
    t: int
    alpha_bar: float
    q: float
    covered: bool
    volume: float
    vacuous: bool
    weights: tuple
    theta_version: int


@dataclass
class RunResult:
    records: list
    thetas: list  # (first t the score is used, PolytopeScore)
    gammas: tuple = ()

    def __len__(self):
        return len(self.records)


class HistoryBuffer:
    """Chronological (t, residual) pairs, optionally capped at ``maxlen``."""

    def __init__(self, maxlen: int | None = None):
        self.ts = deque(maxlen=maxlen)
        self.residuals = deque(maxlen=maxlen)

    def append(self, t: int, residual) -> None:
        if self.ts and t <= self.ts[-1]:
            raise InvalidInput(f"history must be chronological, got t={t} after {self.ts[-1]}")
        self.ts.append(int(t))
        self.residuals.append(np.asarray(residual, dtype=float))

    def arrays(self, last: int | None = None):
        n = len(self.ts)
        start = 0 if last is None else max(0, n - last)
        ts = np.fromiter((self.ts[i] for i in range(start, n)), dtype=float, count=n - start)
        res = np.array([self.residuals[i] for i in range(start, n)]).reshape(-1, 2)
        return ts, res

    def __len__(self):
        return len(self.ts)


def history_weights(bank: dtaci.ExpertBank, T: int, timestamps) -> np.ndarray:
    """Normalised recency weights ``sum_i p_i (1 - gamma_i) ** (T - t + 1)``.

    Evaluated in log space so very old entries do not underflow to an
    all-zero vector.
    """
    g = np.asarray(bank.gammas, dtype=float)
    if np.any(g >= 1):
        raise InvalidInput("history weights need every gamma < 1")
    age = T - np.asarray(timestamps, dtype=float) + 1
    with np.errstate(divide="ignore"):
        logp = np.log(bank.probabilities)
    log_terms = logp[None, :] + age[:, None] * np.log1p(-g)[None, :]
    peak = log_terms.max(axis=1, keepdims=True)
    log_w = peak[:, 0] + np.log(np.exp(log_terms - peak).sum(axis=1))
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def optimize_score(
    residuals,
    weights=None,
    alpha: float = 0.1,
    mckde: MckdeConfig = MckdeConfig(),
    seed=None,
    previous: PolytopeScore | None = None,
) -> PolytopeScore:
    """Fit the convex hull of the weighted ``1 - alpha`` HDR of the residuals.

    Collinear or coincident residuals raise ``DegenerateInput`` unless a
    ``previous`` score is supplied, in which case it is returned unchanged.
    """
    res = np.asarray(residuals, dtype=float).reshape(-1, 2)
    w = np.full(len(res), 1.0 / max(len(res), 1)) if weights is None else np.asarray(weights, float)
    try:
        _check_spread(res, w)
        hdr = mckde_hdr(
            res, w, mckde.m, alpha, mckde.method, mckde.factor, seed, mckde.scale_to_data
        )
        return hull_to_polytope(quickhull(hdr.points))
    except DegenerateInput as exc:
        if previous is None:
            raise
        log.warning("score refit skipped, keeping previous hull: %s", exc)
        return previous


def _check_spread(res, w):
    if len(res) < 3:
        raise DegenerateInput(f"need at least 3 residuals, got {len(res)}")
    w = w / w.sum()
    mu = w @ res
    cov = (res - mu).T @ ((res - mu) * w[:, None])
    ev = np.linalg.eigvalsh(cov)
    if ev[0] <= 1e-12 * max(ev[1], 1e-300) or ev[1] <= 0:
        raise DegenerateInput("residuals are collinear or identical")


def replay(
    theta: PolytopeScore,
    residuals,
    bank: dtaci.ExpertBank,
    window: int,
    version: int = 0,
):
    """Counterfactually rerun DtACI over ``residuals`` under score ``theta``.

    The residuals are re-scored and become the new rolling window; every
    one of them is then fed, in order, through ``bank`` (normally freshly
    initialised) against that window. Returns the final bank and window.
    """
    res = np.asarray(residuals, dtype=float).reshape(-1, 2)
    scores = theta.score(res)
    win = RollingWindow(window, version)
    win.extend(scores)
    for s in scores:
        bank, _ = dtaci.step(bank, win, float(s))
    return bank, win


def _volume(theta, q):
    if q == math.inf:
        return math.inf
    if q == -math.inf:
        return 0.0
    return theta.area(q)


def run(stream: Iterable[Observation], config: AdaptncConfig = AdaptncConfig()) -> RunResult:
    """Run the online loop; the first ``calibration_size`` observations calibrate."""
    config.validate()
    it = iter(stream)
    cal = [obs for _, obs in zip(range(config.calibration_size), it)]
    if len(cal) < config.calibration_size:
        raise InsufficientHistory(
            f"stream ended after {len(cal)} of {config.calibration_size} calibration steps"
        )
    alpha, W = config.target_alpha, config.window

    history = HistoryBuffer(config.history_max)
    for obs in cal:
        history.append(obs.t, obs.residual)
    _, cal_res = history.arrays()
    version = 0
    theta = optimize_score(cal_res, None, alpha, config.mckde, _rng_seed(config.seed, version))
    win = RollingWindow(W, version)
    win.extend(theta.score(cal_res[-W:]))
    bank = config.fresh_bank()

    records = []
    thetas = []
    steps = 0
    for obs in it:
        if not thetas:
            thetas.append((obs.t, theta))
        s = float(theta.score(obs.residual))
        weights = tuple(bank.probabilities)
        bank, out = dtaci.step(bank, win, s)
        vacuous = out.q == math.inf
        records.append(
            StepRecord(obs.t, out.alpha_bar, out.q, not out.err, _volume(theta, out.q),
                       vacuous, weights, version)
        )
        win.push(s, version)
        history.append(obs.t, obs.residual)
        steps += 1

        if config.adapt_interval is not None and steps % config.adapt_interval == 0:
            ts, res = history.arrays()
            omega = history_weights(bank, obs.t, ts)
            new_theta = optimize_score(
                res, omega, alpha, config.mckde, _rng_seed(config.seed, version + 1), theta
            )
            if new_theta is theta:
                continue
            theta = new_theta
            version += 1
            thetas.append((obs.t + 1, theta))
            recent = res[-W:]
            if config.replay:
                bank, win = replay(theta, recent, config.fresh_bank(), W, version)
            else:
                win.reset(theta.score(recent), version)
    return RunResult(records, thetas, tuple(config.gammas))


def _rng_seed(seed: int, version: int):
    return np.random.SeedSequence([int(seed), int(version)])
