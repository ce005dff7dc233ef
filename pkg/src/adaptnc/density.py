"""Weighted Gaussian KDE and Monte-Carlo high-density-region extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

MIN_BANDWIDTH = 1e-6
_CHUNK = 2_000_000  # max pairwise kernel evaluations held in memory at once


def bandwidth(n: int, d: int = 2, method: str = "scott", factor: float = 1.0) -> float:
    """Rule-of-thumb bandwidth factor, before any data scaling.

    Scott: ``n ** (-1 / (d + 4))``; Silverman: ``(n (d + 2) / 4) ** (-1 / (d + 4))``.
    """
    if n < 2:
        raise InvalidInput(f"bandwidth needs at least 2 points, got {n}")
    if d < 1 or factor <= 0:
        raise InvalidInput("d must be >= 1 and factor > 0")
    if method == "scott":
        h = n ** (-1.0 / (d + 4))
    elif method == "silverman":
        h = (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))
    else:
        raise InvalidInput(f"unknown bandwidth method {method!r}")
    return h * factor


def weighted_scale(points, weights) -> float:
    """Pooled per-axis weighted standard deviation."""
    mu = weights @ points
    var = weights @ ((points - mu) ** 2)
    return float(math.sqrt(var.mean()))


@dataclass(frozen=True)
class WeightedKde:
    points: np.ndarray
    weights: np.ndarray
    h: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise InvalidInput("points and weights differ in length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInput("weights must be nonnegative and sum to 1")
        if not self.h > 0:
            raise InvalidInput("bandwidth must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def fit(cls, points, weights=None, method="scott", factor=1.0, scale_to_data=True):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n, d = pts.shape
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        w = w / w.sum()
        # Kish effective sample size; equals n for uniform weights.
        n_eff = max(1.0 / float(w @ w), 2.0)
        h = bandwidth(n_eff, d, method, factor)
        if scale_to_data:
            h *= weighted_scale(pts, w)
        return cls(pts, w, max(h, MIN_BANDWIDTH))

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def kde_eval(kde: WeightedKde, z) -> np.ndarray | float:
    """Density ``sum_i w_i N(z; x_i, h^2 I)`` at one point or a batch."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    X, w, h = kde.points, kde.weights, kde.h
    d = X.shape[1]
    norm = (2 * math.pi * h * h) ** (-d / 2)
    inv = 1.0 / (2 * h * h)
    x2 = (X ** 2).sum(1)
    out = np.empty(len(Z))
    step = max(1, _CHUNK // max(len(X), 1))
    for s in range(0, len(Z), step):
        zc = Z[s : s + step]
        d2 = (zc ** 2).sum(1)[:, None] + x2[None, :] - 2.0 * zc @ X.T
        np.maximum(d2, 0.0, out=d2)
        out[s : s + step] = np.exp(-d2 * inv) @ w
    out *= norm
    return float(out[0]) if single else out


def kde_sample(kde: WeightedKde, m: int, seed=None) -> np.ndarray:
    if m < 1:
        raise InvalidInput("need at least one sample")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(kde.points), size=m, p=kde.weights)
    return kde.points[idx] + kde.h * rng.standard_normal((m, kde.dim))


@dataclass(frozen=True)
class HdrSample:
    points: np.ndarray
    tau: float
    kde: WeightedKde
    m: int

    @property
    def fraction(self) -> float:
        return len(self.points) / self.m


def mckde_hdr(
    points,
    weights=None,
    m: int = 4000,
    alpha: float = 0.1,
    method: str = "scott",
    factor: float = 1.0,
    seed=None,
    scale_to_data: bool = True,
) -> HdrSample:
    """Monte-Carlo estimate of the ``1 - alpha`` highest-density region.

    Draws ``m`` points from the weighted KDE, thresholds their densities at
    the lower ``floor(alpha m)``-th order statistic and keeps the points at
    or above it.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        raise InvalidInput("need at least 2 data points")
    if m < 100:
        raise InvalidInput("need at least 100 Monte-Carlo samples")
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    kde = WeightedKde.fit(pts, weights, method, factor, scale_to_data)
    z = kde_sample(kde, m, seed)
    xi = kde_eval(kde, z)
    k = max(int(math.floor(alpha * m)), 1)
    tau = float(np.partition(xi, k - 1)[k - 1])
    return HdrSample(z[xi >= tau], tau, kde, m)
