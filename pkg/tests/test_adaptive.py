import dataclasses
import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptnc import dtaci
from adaptnc.adaptive import (
    AdaptncConfig,
    HistoryBuffer,
    MckdeConfig,
    StepRecord,
    history_weights,
    optimize_score,
    replay,
    run,
)
from adaptnc.baselines import run_method
from adaptnc.core import Observation, RollingWindow
from adaptnc.dtaci import ExpertBank
from adaptnc.envs import make_env
from adaptnc.errors import DegenerateInput, InvalidInput
from adaptnc.geometry import hausdorff_distance

HDR90_AREA = math.pi * -2 * math.log(0.1)


def raw_bank(gammas, probs):
    k = len(gammas)
    return ExpertBank(np.array(gammas, float), np.full(k, 0.1), np.array(probs, float), 0.1, 0.0, 0.1)


def gaussian_stream(n, seed=0, scale=1.0, start=0):
    z = np.random.default_rng(seed).standard_normal((n, 2)) * scale
    return [Observation(start + i, np.zeros(1), z[i], np.zeros(2)) for i in range(n)]


def test_history_weights_uniform_without_forgetting():
    w = history_weights(raw_bank([0.0], [1.0]), 10, np.arange(8))
    assert np.allclose(w, 1 / 8)


def test_history_weights_ratio_for_half_decay():
    w = history_weights(raw_bank([0.5], [1.0]), 2, np.array([0, 1]))
    # Ages T - t + 1 are 3 and 2: newer / older = 0.5**2 / 0.5**3.
    assert w[1] / w[0] == pytest.approx(2.0)


def test_history_weights_dominant_expert():
    ts = np.arange(20)
    mixed = history_weights(raw_bank([0.1, 0.3], [1.0, 0.0]), 25, ts)
    single = history_weights(raw_bank([0.1], [1.0]), 25, ts)
    assert np.allclose(mixed, single)


def test_history_weights_reject_gamma_one():
    with pytest.raises(InvalidInput):
        history_weights(raw_bank([0.5, 1.0], [0.5, 0.5]), 3, np.arange(3))


@given(
    st.lists(st.floats(0.001, 0.9), min_size=1, max_size=5, unique=True),
    st.integers(2, 300),
    st.data(),
)
def test_history_weights_normalised_and_decreasing(gammas, n, data):
    probs = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(gammas), max_size=len(gammas)))
    w = history_weights(raw_bank(sorted(gammas), probs), n + 5, np.arange(n))
    assert abs(w.sum() - 1) < 1e-12
    assert np.all(np.diff(w) >= 0)
    assert np.all(w > 0)


def test_history_weights_survive_long_histories():
    w = history_weights(raw_bank([0.5], [1.0]), 100_000, np.arange(100_000))
    assert np.isfinite(w).all() and w[-1] > 0


def test_optimize_score_standard_normal_area():
    res = np.random.default_rng(0).standard_normal((5000, 2))
    theta = optimize_score(res, None, 0.1, MckdeConfig(m=20_000), seed=1)
    assert abs(theta.area(0.0) - HDR90_AREA) / HDR90_AREA < 0.12


def test_optimize_score_degenerate_falls_back(caplog):
    prev = optimize_score(np.random.default_rng(1).normal(size=(50, 2)), seed=0)
    with caplog.at_level(logging.WARNING, logger="adaptnc.adaptive"):
        out = optimize_score(np.ones((40, 2)), None, 0.1, MckdeConfig(), 0, prev)
    assert out is prev
    assert "keeping previous hull" in caplog.text
    with pytest.raises(DegenerateInput):
        optimize_score(np.ones((40, 2)), seed=0)


def test_recency_weights_drop_stale_mode():
    env = make_env("gmm", calibration=500, seed=3, length=5500)
    obs = env.observations()
    hist = HistoryBuffer()
    for o in obs:
        hist.append(o.t, o.residual)
    ts, res = hist.arrays()
    bank = ExpertBank.fresh(window=500)
    omega = history_weights(bank, int(ts[-1]), ts)
    cfg = MckdeConfig()
    recent = optimize_score(res, omega, 0.1, cfg, seed=0)
    uniform = optimize_score(res, None, 0.1, cfg, seed=0)
    assert recent.area(0.0) < uniform.area(0.0)


def test_history_buffer_is_chronological_and_capped():
    h = HistoryBuffer(maxlen=3)
    for t in range(5):
        h.append(t, [t, -t])
    ts, res = h.arrays()
    assert list(ts) == [2, 3, 4] and res.shape == (3, 2)
    with pytest.raises(InvalidInput):
        h.append(4, [0, 0])


def fresh_dtaci(scores, bank, window):
    # Reference: plain DtACI over the same scores against the full window.
    w = RollingWindow(window)
    w.extend(scores)
    for s in scores:
        bank, _ = dtaci.step(bank, w, float(s))
    return bank


def test_replay_with_unchanged_score_matches_fresh_dtaci(rng):
    res = rng.normal(size=(300, 2))
    theta = optimize_score(res, seed=0)
    cfg = AdaptncConfig(window=200)
    recent = res[-200:]
    bank, win = replay(theta, recent, cfg.fresh_bank(), 200, version=4)
    ref = fresh_dtaci(list(theta.score(recent)), cfg.fresh_bank(), 200)
    assert dtaci.aggregate_alpha(bank) == dtaci.aggregate_alpha(ref)
    assert np.array_equal(bank.weights, ref.weights)
    assert win.theta_version == 4 and win.scores == list(theta.score(recent))


def test_replay_single_entry_is_one_update(rng):
    res = rng.normal(size=(50, 2))
    theta = optimize_score(res, seed=0)
    cfg = AdaptncConfig(window=10)
    bank, win = replay(theta, res[-1:], cfg.fresh_bank(), 10)
    one, _ = dtaci.step(cfg.fresh_bank(), win, float(theta.score(res[-1])))
    assert np.array_equal(bank.alphas, one.alphas)
    assert np.array_equal(bank.weights, one.weights)


def test_replay_does_not_touch_inputs(rng):
    res = rng.normal(size=(100, 2))
    copy = res.copy()
    theta = optimize_score(res, seed=0)
    replay(theta, res, AdaptncConfig(window=50).fresh_bank(), 50)
    assert np.array_equal(res, copy)


def test_config_validation():
    with pytest.raises(InvalidInput):
        AdaptncConfig(adapt_interval=0).validate()
    with pytest.raises(InvalidInput):
        AdaptncConfig(window=9).validate()
    with pytest.raises(InvalidInput):
        AdaptncConfig(target_alpha=1.5).validate()
    with pytest.raises(InvalidInput):
        AdaptncConfig(gammas=(0.5, 1.0)).validate()


SMALL = AdaptncConfig(window=100, calibration_size=200, adapt_interval=100)


def test_never_adapting_equals_fixed_dtaci():
    obs = gaussian_stream(1200)
    a = run(obs, dataclasses.replace(SMALL, adapt_interval=5000))
    b = run_method("dtaci_fixed", obs, SMALL)
    assert a.records == b.records


def test_records_use_current_theta_version():
    obs = gaussian_stream(200, scale=3.0, start=-200) + gaussian_stream(800, seed=1)
    result = run(obs, SMALL)
    starts = [t for t, _ in result.thetas]
    assert len(starts) > 1
    for r in result.records:
        assert r.theta_version == np.searchsorted(starts, r.t, side="right") - 1
        assert not r.vacuous or (r.covered and r.volume == math.inf)


def test_replay_leaves_past_records_alone():
    obs = gaussian_stream(200, scale=3.0, start=-200) + gaussian_stream(800, seed=1)
    with_replay = run(obs, SMALL).records
    without = run(obs, dataclasses.replace(SMALL, replay=False)).records
    fixed = run_method("dtaci_fixed", obs, SMALL).records
    first = SMALL.adapt_interval
    assert with_replay[:first] == fixed[:first] == without[:first]
    assert all(isinstance(r, StepRecord) for r in with_replay)


def test_hulls_stabilise_on_stationary_stream():
    obs = gaussian_stream(300, seed=2, scale=3.0, start=-300) + gaussian_stream(3000, seed=3)
    cfg = AdaptncConfig(window=200, calibration_size=300, adapt_interval=100)
    result = run(obs, cfg)
    polys = [theta.vertices(0.0) for _, theta in result.thetas]
    d = [hausdorff_distance(a, b) for a, b in zip(polys, polys[1:])]
    assert len(d) >= 10
    assert np.median(d[-5:]) < np.median(d[:5])


def test_run_needs_full_calibration_prefix():
    from adaptnc.errors import InsufficientHistory

    with pytest.raises(InsufficientHistory):
        run(gaussian_stream(50), SMALL)
