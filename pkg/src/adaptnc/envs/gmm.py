"""Two-component Gaussian mixture stream with a drifting mixing weight."""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..core import Observation
from ..errors import InvalidInput
from .base import Environment


@dataclass(frozen=True)
class GmmStreamConfig:
    mean1: tuple = (1.0, -1.2)
    cov1: tuple = ((1.2, 0.6), (0.6, 0.9))
    mean2: tuple = (-1.0, -1.2)
    cov2: tuple = ((0.8, -0.3), (-0.3, 1.1))
    length: int = 7000
    ramp_start: float = 3000
    ramp_end: float = 4000

    def validate(self) -> None:
        for name in ("cov1", "cov2"):
            c = np.asarray(getattr(self, name), dtype=float)
            if c.shape != (2, 2) or not np.allclose(c, c.T) or np.any(np.linalg.eigvalsh(c) <= 0):
                raise InvalidInput(f"{name} must be symmetric positive-definite")
        if self.ramp_end < self.ramp_start:
            raise InvalidInput("ramp_end must not precede ramp_start")

    def weight(self, t) -> np.ndarray | float:
        """Mixing weight on the second component at time ``t``."""
        t = np.asarray(t, dtype=float)
        if self.ramp_end == self.ramp_start:
            w = (t >= self.ramp_start).astype(float)
        else:
            w = np.clip((t - self.ramp_start) / (self.ramp_end - self.ramp_start), 0.0, 1.0)
        return float(w) if w.ndim == 0 else w


class GmmStream(Environment):
    """Samples ``z_t`` from the mixture; the point prediction is the origin."""

    name = "gmm"

    def __init__(self, config: GmmStreamConfig = GmmStreamConfig(), calibration: int = 0, seed: int = 0,
                 length: int | None = None):
        config.validate()
        self.config = config
        self._chol = [np.linalg.cholesky(np.asarray(c, float)) for c in (config.cov1, config.cov2)]
        self._mean = [np.asarray(m, float) for m in (config.mean1, config.mean2)]
        super().__init__(config.length if length is None else length, calibration, seed)

    def _reset(self) -> None:
        pass

    def sample(self, w: float) -> np.ndarray:
        comp = int(self.rng.random() < w)
        return self._mean[comp] + self._chol[comp] @ self.rng.standard_normal(2)

    def _step(self) -> Observation:
        w = self.config.weight(self.t)
        z = self.sample(w)
        return Observation(self.t, np.array([w]), z, np.zeros(2))


def gaussian_nll(z, mean, cov) -> np.ndarray:
    """Negative log-likelihood of rows of ``z`` under ``N(mean, cov)``."""
    z = np.atleast_2d(np.asarray(z, float))
    cov = np.asarray(cov, float)
    diff = z - np.asarray(mean, float)
    sol = np.linalg.solve(cov, diff.T).T
    maha = np.einsum("ij,ij->i", diff, sol)
    return 0.5 * maha + 0.5 * math.log(np.linalg.det(cov)) + math.log(2 * math.pi)


@dataclass
class AlphaStarTrace:
    t: np.ndarray
    weight: np.ndarray
    q_star: np.ndarray  # (T, 2) oracle (1 - alpha) score quantiles
    alpha_star: np.ndarray  # (T, 2)
    scores: np.ndarray = field(repr=False, default=None)

    @property
    def difference(self) -> np.ndarray:
        return self.alpha_star[:, 0] - self.alpha_star[:, 1]


def _mixture_quantiles(score_fns, config, weights, alpha, n_mc, seed):
    # Common random numbers: one fixed draw per component, reused for every w.
    rng = np.random.default_rng(seed)
    draws = []
    for mean, cov in ((config.mean1, config.cov1), (config.mean2, config.cov2)):
        L = np.linalg.cholesky(np.asarray(cov, float))
        draws.append(np.asarray(mean, float) + rng.standard_normal((n_mc, 2)) @ L.T)
    out = np.empty((len(weights), len(score_fns)))
    uniq, inv = np.unique(weights, return_inverse=True)
    for k, fn in enumerate(score_fns):
        s1, s2 = np.sort(fn(draws[0])), np.sort(fn(draws[1]))
        grid = np.sort(np.concatenate([s1, s2]))
        f1 = np.searchsorted(s1, grid, side="right") / n_mc
        f2 = np.searchsorted(s2, grid, side="right") / n_mc
        qs = np.empty(len(uniq))
        for j, w in enumerate(uniq):
            cdf = (1 - w) * f1 + w * f2
            qs[j] = grid[min(np.searchsorted(cdf, 1 - alpha - 1e-12), len(grid) - 1)]
        out[:, k] = qs[inv]
    return out


def gmm_alpha_star(
    samples,
    t,
    config: GmmStreamConfig = GmmStreamConfig(),
    alpha: float = 0.1,
    score_fns=None,
    window: int | None = None,
    n_mc: int = 20000,
    seed: int = 0,
) -> AlphaStarTrace:
    """Per-step optimal miscoverage levels under each score function.

    For each ``t`` the oracle threshold ``q*`` is the ``1 - alpha`` quantile
    of the score under the true mixture at ``w_t``; the optimal level is
    ``1 - F_t(q*)`` with ``F_t`` the empirical CDF of the scores observed so
    far (cumulative, or the last ``window`` when given).
    """
    samples = np.asarray(samples, float).reshape(-1, 2)
    t = np.asarray(t)
    if score_fns is None:
        score_fns = (
            lambda z: gaussian_nll(z, config.mean1, config.cov1),
            lambda z: gaussian_nll(z, config.mean2, config.cov2),
        )
    w = np.asarray(config.weight(t), float).reshape(-1)
    q_star = _mixture_quantiles(score_fns, config, w, alpha, n_mc, seed)
    scores = np.column_stack([fn(samples) for fn in score_fns])
    a_star = np.empty_like(q_star)
    for k in range(len(score_fns)):
        hist: list = []
        fifo: deque = deque()
        for i, s in enumerate(scores[:, k]):
            insort(hist, s)
            fifo.append(s)
            if window is not None and len(fifo) > window:
                old = fifo.popleft()
                del hist[bisect_right(hist, old) - 1]
            a_star[i, k] = 1.0 - bisect_right(hist, q_star[i, k]) / len(hist)
    return AlphaStarTrace(t, w, q_star, a_star, scores)
