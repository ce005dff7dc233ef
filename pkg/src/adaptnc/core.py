"""Shared domain types, rolling-window quantiles and the polytope score."""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyWindow, InvalidInput
from .geometry import PolytopeScore

__all__ = [
    "Observation",
    "PolytopeScore",
    "PredictionRegion",
    "RollingWindow",
    "beta_of",
    "empirical_quantile",
    "region_volume",
    "score_eval",
]

# Slack for ceil(level * n) so that e.g. (1 - 0.1) * 10 lands on 9, not 10.
_RANK_EPS = 1e-9


@dataclass(frozen=True)
class Observation:
    t: int
    x: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return np.asarray(self.y, dtype=float) - np.asarray(self.y_hat, dtype=float)


def score_eval(theta: PolytopeScore, y_hat, y) -> float:
    """Signed polytope distance of ``y - y_hat``: negative inside the hull."""
    z = np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float)
    return float(np.max(theta.A @ z - theta.b))


def region_volume(theta: PolytopeScore, q: float) -> float:
    return theta.area(q)


@dataclass(frozen=True)
class PredictionRegion:
    theta: PolytopeScore
    center: np.ndarray
    q: float

    def __contains__(self, y) -> bool:
        return score_eval(self.theta, self.center, y) <= self.q

    @property
    def volume(self) -> float:
        return region_volume(self.theta, self.q)


@dataclass
class RollingWindow:
    """FIFO of the last ``capacity`` scores with O(log n) rank queries."""

    capacity: int
    theta_version: int = 0
    _fifo: deque = field(default_factory=deque, init=False, repr=False)
    _sorted: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        if self.capacity <= 0:
            raise InvalidInput("window capacity must be positive")

    def push(self, score: float, version: int | None = None) -> None:
        if version is not None and version != self.theta_version:
            raise InvalidInput(
                f"score computed under theta v{version}, window holds v{self.theta_version}"
            )
        score = float(score)
        if len(self._fifo) == self.capacity:
            old = self._fifo.popleft()
            del self._sorted[bisect_right(self._sorted, old) - 1]
        self._fifo.append(score)
        insort(self._sorted, score)

    def extend(self, scores, version: int | None = None) -> None:
        for s in scores:
            self.push(s, version)

    def reset(self, scores=(), version: int = 0) -> None:
        self._fifo.clear()
        self._sorted.clear()
        self.theta_version = version
        self.extend(scores)

    def copy(self) -> "RollingWindow":
        w = RollingWindow(self.capacity, self.theta_version)
        w._fifo = deque(self._fifo)
        w._sorted = list(self._sorted)
        return w

    @property
    def scores(self) -> list:
        return list(self._fifo)

    def sorted_scores(self) -> list:
        return self._sorted

    def __len__(self):
        return len(self._fifo)


def empirical_quantile(window: RollingWindow, level: float) -> float:
    """The ``ceil(level * n)``-th smallest stored score.

    Levels at or above 1 give ``+inf`` (vacuous region) and levels at or
    below 0 give ``-inf`` (empty region), even for an empty window.
    """
    if level >= 1:
        return math.inf
    if level <= 0:
        return -math.inf
    n = len(window)
    if n == 0:
        raise EmptyWindow("quantile of an empty window")
    k = min(max(math.ceil(level * n - _RANK_EPS), 1), n)
    return window.sorted_scores()[k - 1]


def beta_of(window: RollingWindow, s_t: float) -> float:
    """Fraction of stored scores at or below ``s_t`` (inclusive ties)."""
    n = len(window)
    if n == 0:
        raise EmptyWindow("rank within an empty window")
    return bisect_right(window.sorted_scores(), s_t) / n
