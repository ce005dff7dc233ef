import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptnc.adaptive import StepRecord
from adaptnc.errors import EmptyRun, WindowTooLarge
from adaptnc.metrics import (
    energy_distance,
    energy_shift_test,
    global_coverage,
    local_coverage,
    max_alpha_jump,
    summarize,
    volume_stats,
)


def rec(t, covered=True, volume=1.0, vacuous=False, alpha=0.1):
    return StepRecord(t, alpha, math.inf if vacuous else 0.0, covered or vacuous,
                      math.inf if vacuous else volume, vacuous, (), 0)


def test_global_coverage_examples():
    assert global_coverage([rec(t) for t in range(10)]) == 1.0
    assert global_coverage([rec(t, covered=t % 2 == 0) for t in range(10)]) == 0.5
    with pytest.raises(EmptyRun):
        global_coverage([])


def test_local_coverage_examples():
    recs = [rec(t) for t in range(300)]
    assert np.all(local_coverage(recs, 100) == 1.0)
    recs[150] = rec(150, covered=False)
    lc = local_coverage(recs, 100)
    # A centred window over [t - 49, t + 50] contains t0 = 150 for t in [100, 199].
    dipped = np.flatnonzero(lc < 1)
    assert dipped.min() == 100 and dipped.max() == 199
    assert np.allclose(lc[dipped], 0.99)
    with pytest.raises(WindowTooLarge):
        local_coverage(recs, 301)


def test_volume_stats_examples():
    assert volume_stats([rec(t, volume=2.5) for t in range(5)]) == (2.5, 0.0)
    mean, vac = volume_stats([rec(t, vacuous=True) for t in range(5)])
    assert math.isnan(mean) and vac == 1.0
    mixed = [rec(0, volume=1.0), rec(1, vacuous=True), rec(2, covered=False, volume=9.0), rec(3, volume=3.0)]
    assert volume_stats(mixed) == (2.0, 0.25)


@given(st.lists(st.booleans(), min_size=20, max_size=400), st.integers(1, 20))
def test_local_mean_tracks_global(covered, w):
    recs = [rec(t, covered=c) for t, c in enumerate(covered)]
    T = len(recs)
    lc = local_coverage(recs, w)
    assert np.all((lc >= 0) & (lc <= 1))
    assert abs(lc.mean() - global_coverage(recs)) <= w / T + 1e-12


@given(st.lists(st.booleans(), min_size=5, max_size=100))
def test_metrics_pure_and_idempotent(covered):
    recs = [rec(t, covered=c) for t, c in enumerate(covered)]
    snapshot = list(recs)
    a = summarize(recs, 5)
    b = summarize(recs, 5)
    assert a == b and recs == snapshot
    assert 0 <= a.global_coverage <= 1 and 0 <= a.vacuous_fraction <= 1


def test_max_alpha_jump():
    recs = [rec(t, alpha=a) for t, a in enumerate([0.1, 0.1, 0.3, 0.25, 0.25])]
    assert max_alpha_jump(recs) == pytest.approx(0.2)
    assert max_alpha_jump(recs, at=[2]) == pytest.approx(0.05)
    assert max_alpha_jump(recs[:1]) == 0.0


def test_energy_distance_matches_scipy_in_one_dimension(rng):
    from scipy.stats import energy_distance as scipy_energy

    a, b = rng.normal(size=300), rng.normal(0.5, 1.2, size=200)
    # scipy reports the square root of the statistic.
    assert energy_distance(a, b) == pytest.approx(scipy_energy(a, b) ** 2, rel=1e-9)


def test_energy_shift_test_detects_shift(rng):
    a = rng.normal(size=(300, 2))
    stat, null95 = energy_shift_test(a, rng.normal(size=(300, 2)) + [0.5, 0], 100)
    assert stat > null95 > 0
    stat, null95 = energy_shift_test(a, rng.normal(size=(300, 2)), 100)
    assert stat < 3 * null95
