import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptnc.core import (
    Observation,
    PolytopeScore,
    PredictionRegion,
    RollingWindow,
    beta_of,
    empirical_quantile,
    region_volume,
    score_eval,
)
from adaptnc.errors import EmptyWindow, InvalidInput

SQUARE = PolytopeScore(np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]]), np.full(4, 0.5))

scores_st = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40)


def window_of(scores, capacity=None):
    w = RollingWindow(capacity or max(len(scores), 1))
    w.extend(scores)
    return w


def test_score_eval_examples():
    assert score_eval(SQUARE, (0, 0), (0, 0)) == pytest.approx(-0.5)
    assert score_eval(SQUARE, (0, 0), (0.5, 0)) == 0.0
    assert score_eval(SQUARE, (0, 0), (2, 0)) == pytest.approx(1.5)


def test_region_volume_examples():
    assert region_volume(SQUARE, 0.0) == pytest.approx(1.0)
    assert region_volume(SQUARE, 0.5) == pytest.approx(4.0)
    assert region_volume(SQUARE, -0.5) == 0.0
    assert region_volume(SQUARE, math.inf) == math.inf


def test_region_volume_monte_carlo_cross_check(rng):
    z = rng.uniform(-1.5, 1.5, (10**6, 2))
    inside = np.mean(SQUARE.score(z) <= 0.5) * 9.0
    assert inside == pytest.approx(4.0, rel=0.01)


def test_empirical_quantile_examples():
    w = window_of([1, 2, 3, 4, 5])
    assert empirical_quantile(w, 0.9) == 5
    assert empirical_quantile(w, 1.2) == math.inf
    assert empirical_quantile(w, 0.0) == -math.inf
    assert empirical_quantile(window_of([7]), 0.5) == 7


def test_empirical_quantile_empty_window():
    with pytest.raises(EmptyWindow):
        empirical_quantile(RollingWindow(3), 0.5)
    assert empirical_quantile(RollingWindow(3), 1.0) == math.inf


def test_beta_of_examples():
    assert beta_of(window_of([1, 2, 3, 4, 5]), 3) == pytest.approx(0.6)
    assert beta_of(window_of([1, 2, 3]), 0) == 0.0
    assert beta_of(window_of([1, 2, 3]), 10) == 1.0
    with pytest.raises(EmptyWindow):
        beta_of(RollingWindow(2), 1.0)


def test_rolling_window_evicts_oldest_first():
    w = RollingWindow(3)
    w.extend([5, 1, 4, 2])
    assert w.scores == [1, 4, 2]
    assert w.sorted_scores() == [1, 2, 4]
    with pytest.raises(InvalidInput):
        RollingWindow(0)


def test_rolling_window_rejects_stale_version():
    w = RollingWindow(3, theta_version=2)
    w.push(1.0, version=2)
    with pytest.raises(InvalidInput):
        w.push(1.0, version=1)


@given(scores_st, st.integers(1, 10))
def test_window_length_never_exceeds_capacity(scores, cap):
    w = RollingWindow(cap)
    for i, s in enumerate(scores):
        w.push(s)
        assert len(w) <= cap
        assert w.scores == [float(x) for x in scores[max(0, i + 1 - cap): i + 1]]
        assert w.sorted_scores() == sorted(w.scores)


@given(scores_st, st.data())
def test_quantile_beta_consistency_for_member_scores(scores, data):
    w = window_of(scores)
    s = data.draw(st.sampled_from(scores))
    b = beta_of(w, s)
    assert empirical_quantile(w, b) >= s
    if len(set(scores)) == len(scores):
        n = len(scores)
        k = round(b * n)
        if k > 1:
            assert empirical_quantile(w, (k - 1) / n) < s


@given(scores_st, st.floats(-200, 200, allow_nan=False))
def test_beta_brackets_arbitrary_scores(scores, s):
    # For scores outside the window beta still picks the tightest covering rank.
    w = window_of(scores)
    b = beta_of(w, s)
    n = len(scores)
    assert 0.0 <= b <= 1.0
    if b < 1.0:
        assert empirical_quantile(w, b) <= s
        assert empirical_quantile(w, b + 1.0 / n) > s


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(-0.4, 2.0))
def test_membership_matches_score(point, q):
    region = PredictionRegion(SQUARE, np.zeros(2), q)
    inside = abs(point[0]) <= 0.5 + q + 1e-12 and abs(point[1]) <= 0.5 + q + 1e-12
    if abs(max(abs(point[0]), abs(point[1])) - 0.5 - q) > 1e-9:
        assert (np.asarray(point) in region) == inside
    assert (np.asarray(point) in region) == (score_eval(SQUARE, np.zeros(2), point) <= q)


def test_membership_matches_geometry_on_random_points(rng):
    theta = PolytopeScore(
        np.array([[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, 7)[:-1]]), np.ones(6)
    )
    q = 0.3
    verts = theta.vertices(q)
    z = rng.uniform(-2, 2, (1000, 2))
    # Inside a CCW convex polygon iff left of every edge.
    e = np.roll(verts, -1, axis=0) - verts
    cross = e[None, :, 0] * (z[:, None, 1] - verts[None, :, 1]) - e[None, :, 1] * (z[:, None, 0] - verts[None, :, 0])
    geo = np.all(cross >= -1e-9, axis=1)
    member = np.array([zi in PredictionRegion(theta, np.zeros(2), q) for zi in z])
    assert np.array_equal(geo, member)


@given(st.floats(-1, 3), st.floats(0, 2))
def test_region_volume_nondecreasing_in_q(q, dq):
    assert region_volume(SQUARE, q) <= region_volume(SQUARE, q + dq) + 1e-12


@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
)
def test_translation_equivariance(y_hat, y, c):
    a = score_eval(SQUARE, y_hat, y)
    b = score_eval(SQUARE, np.add(y_hat, c), np.add(y, c))
    assert b == pytest.approx(a, abs=1e-9)


def test_observation_residual_is_exact_difference():
    obs = Observation(0, np.zeros(1), np.array([1.5, -2.0]), np.array([0.25, 1.0]))
    assert np.array_equal(obs.residual, np.array([1.25, -3.0]))
