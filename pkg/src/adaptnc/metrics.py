"""Coverage, volume and vacuity statistics over StepRecord sequences."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyRun, WindowTooLarge


def _covered(records) -> np.ndarray:
    if len(records) == 0:
        raise EmptyRun("no step records")
    return np.fromiter((r.covered for r in records), dtype=float, count=len(records))


def global_coverage(records) -> float:
    return float(_covered(records).mean())


def local_coverage(records, w: int = 100) -> np.ndarray:
    """Centred moving average of coverage over ``[t - w/2 + 1, t + w/2]``.

    Odd ``w`` is centred symmetrically on ``t``. Near the ends the window
    is truncated to the steps that exist.
    """
    cov = _covered(records)
    T = len(cov)
    if w > T:
        raise WindowTooLarge(f"window {w} exceeds run length {T}")
    if w < 1:
        raise WindowTooLarge("window must be >= 1")
    csum = np.concatenate([[0.0], np.cumsum(cov)])
    idx = np.arange(T)
    start = idx - (w - 1) // 2
    lo = np.clip(start, 0, T)
    hi = np.clip(start + w, 0, T)
    return (csum[hi] - csum[lo]) / (hi - lo)


def volume_stats(records):
    """(mean volume over covered, non-vacuous steps; fraction of vacuous steps).

    The mean is NaN when no step qualifies.
    """
    if len(records) == 0:
        raise EmptyRun("no step records")
    vac = np.array([r.vacuous for r in records], dtype=bool)
    cov = np.array([r.covered for r in records], dtype=bool)
    vol = np.array([r.volume for r in records], dtype=float)
    keep = cov & ~vac & np.isfinite(vol)
    mean = float(vol[keep].mean()) if keep.any() else math.nan
    return mean, float(vac.mean())


@dataclass(frozen=True)
class RunSummary:
    global_coverage: float
    mean_volume_covered: float
    local_mean: float
    local_std: float
    vacuous_fraction: float
    steps: int
    window: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(records, w: int = 100) -> RunSummary:
    local = local_coverage(records, min(w, len(records)))
    mean_vol, vac = volume_stats(records)
    return RunSummary(
        global_coverage=global_coverage(records),
        mean_volume_covered=mean_vol,
        local_mean=float(local.mean()),
        local_std=float(local.std()),
        vacuous_fraction=vac,
        steps=len(records),
        window=w,
    )


def max_alpha_jump(records, at=None) -> float:
    """Largest ``|alpha_bar[t+1] - alpha_bar[t]|``, optionally only for ``t`` in ``at``."""
    a = np.array([r.alpha_bar for r in records], dtype=float)
    if len(a) < 2:
        return 0.0
    jumps = np.abs(np.diff(a))
    if at is not None:
        ts = np.array([r.t for r in records])
        pos = np.searchsorted(ts, np.asarray(list(at)))
        pos = pos[(pos < len(jumps)) & (pos >= 0)]
        if len(pos) == 0:
            return 0.0
        jumps = jumps[pos]
    return float(jumps.max())


def _mean_pairwise(a, b) -> float:
    d2 = (a ** 2).sum(1)[:, None] + (b ** 2).sum(1)[None, :] - 2.0 * a @ b.T
    return float(np.sqrt(np.maximum(d2, 0.0)).mean())


def energy_distance(a, b) -> float:
    """Squared energy distance ``2 E|X - Y| - E|X - X'| - E|Y - Y'|`` of two samples."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    return 2 * _mean_pairwise(a, b) - _mean_pairwise(a, a) - _mean_pairwise(b, b)


def energy_shift_test(a, b, permutations: int = 200, seed=0):
    """(energy distance, 95th percentile of the label-permutation null)."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    pooled = np.vstack([a, b])
    d2 = (pooled ** 2).sum(1)[:, None] + (pooled ** 2).sum(1)[None, :] - 2.0 * pooled @ pooled.T
    D = np.sqrt(np.maximum(d2, 0.0))
    n = len(a)

    def stat(idx):
        ia, ib = idx[:n], idx[n:]
        return 2 * D[np.ix_(ia, ib)].mean() - D[np.ix_(ia, ia)].mean() - D[np.ix_(ib, ib)].mean()

    rng = np.random.default_rng(seed)
    null = [stat(rng.permutation(len(pooled))) for _ in range(permutations)]
    return float(stat(np.arange(len(pooled)))), float(np.quantile(null, 0.95))
