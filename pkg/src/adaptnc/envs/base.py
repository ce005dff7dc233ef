"""Common stream interface for the simulated benchmarks."""

from __future__ import annotations

import numpy as np

from ..core import Observation
from ..errors import StreamExhausted


class Environment:
    """A seeded simulator that emits one :class:`Observation` per step.

    The first ``calibration`` observations carry negative ``t`` and form
    the calibration prefix; evaluation steps run ``t = 0 .. length - 1``.
    """

    name = "base"

    def __init__(self, length: int, calibration: int = 0, seed: int = 0):
        self.length = int(length)
        self.calibration = int(calibration)
        self.reset(seed)

    def reset(self, seed: int = 0) -> None:
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.t = -self.calibration
        self._reset()

    def done(self) -> bool:
        return self.t >= self.length

    def next(self) -> Observation:
        if self.done():
            raise StreamExhausted(f"{self.name} stream exhausted at t={self.t}")
        obs = self._step()
        self.t += 1
        return obs

    def __iter__(self):
        while not self.done():
            yield self.next()

    def observations(self) -> list:
        return list(self)

    def _reset(self) -> None:
        raise NotImplementedError

    def _step(self) -> Observation:
        raise NotImplementedError
