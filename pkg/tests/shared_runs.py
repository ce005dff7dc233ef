"""Session-wide caches of benchmark streams and method runs for the acceptance suite."""

import time
from functools import lru_cache

from adaptnc.adaptive import AdaptncConfig
from adaptnc.baselines import run_method
from adaptnc.envs import make_env

CALIBRATION = 500
SEEDS = tuple(range(10))


def experiment_config(seed: int) -> AdaptncConfig:
    return AdaptncConfig(history_max=2000, seed=seed)


@lru_cache(maxsize=None)
def stream(env: str, seed: int = 0, params: tuple = ()):
    """(observations including the calibration prefix, seconds spent simulating)."""
    start = time.perf_counter()
    obs = make_env(env, dict(params), calibration=CALIBRATION, seed=seed).observations()
    return tuple(obs), time.perf_counter() - start


@lru_cache(maxsize=None)
def run(env: str, seed: int, method: str, params: tuple = ()):
    """(RunResult, seconds spent in the method)."""
    obs, _ = stream(env, seed, params)
    start = time.perf_counter()
    result = run_method(method, obs, experiment_config(seed))
    return result, time.perf_counter() - start


def evaluation(env: str, seed: int = 0, params: tuple = ()):
    """Observations after the calibration prefix."""
    return [o for o in stream(env, seed, params)[0] if o.t >= 0]
