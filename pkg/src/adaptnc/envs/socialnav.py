"""Multi-agent social-force crowd with a widening interaction radius."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..core import Observation
from ..errors import InsufficientHistory, InvalidInput
from .base import Environment


@dataclass(frozen=True)
class SocialNavConfig:
    dt: float = 0.1
    tau: float = 0.5
    v0_mean: float = 1.34
    v0_std: float = 0.26
    v0_min: float = 0.3
    vmax_factor: float = 1.3
    A: float = 5.0
    B: float = 2.0
    anticipation: float = 2.0
    lam: float = 0.5
    rear: float = 0.5
    A_wall: float = 10.0
    R_wall: float = 0.2
    n_agents: int = 8
    size: float = 10.0
    length: int = 6000
    radius_start: float = 2.0
    radius_end: float = 5.0
    ramp_start: float = 2000
    ramp_end: float = 4000
    noise_std: float = 0.3
    arrival: float = 0.3
    goal_margin: float = 0.5
    min_separation: float = 1.0
    reassign_goals: bool = True
    walls: bool = True
    ego: int = 0
    horizon: int = 5
    history: int = 10
    velocity_window: int = 3
    predictor: str = "nominal"
    nominal_radius: float | None = None

    def validate(self) -> None:
        if self.n_agents < 2:
            raise InvalidInput("need at least 2 agents")
        if self.radius_end < self.radius_start or self.ramp_end < self.ramp_start:
            raise InvalidInput("collaboration radius ramp must be monotone")
        if not 0 <= self.ego < self.n_agents:
            raise InvalidInput("ego index out of range")
        if self.history < self.velocity_window + 1 or self.velocity_window < 1:
            raise InvalidInput("history must cover the velocity window")
        for name in ("dt", "tau", "B", "R_wall", "size", "arrival"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        if 2 * self.goal_margin >= self.size:
            raise InvalidInput("goal_margin leaves no room for goals")
        if self.predictor not in PREDICTORS:
            raise InvalidInput(f"predictor must be one of {PREDICTORS}")

    def radius(self, t: float) -> float:
        if self.ramp_end == self.ramp_start:
            return self.radius_end if t >= self.ramp_start else self.radius_start
        frac = min(max((t - self.ramp_start) / (self.ramp_end - self.ramp_start), 0.0), 1.0)
        return self.radius_start + frac * (self.radius_end - self.radius_start)


def anisotropy(e, f, lam: float, rear: float) -> np.ndarray:
    """Field-of-view weight for forces ``f`` felt by agents heading along ``e``."""
    ne = np.linalg.norm(e, axis=-1)
    nf = np.linalg.norm(f, axis=-1)
    denom = ne * nf
    cos = np.divide((e * f).sum(-1), denom, out=np.ones_like(denom), where=denom > 0)
    return np.where(cos >= 0, lam + (1 - lam) * (1 + cos) / 2, rear)


def social_forces(pos, vel, e, radius: float, c: SocialNavConfig) -> np.ndarray:
    """Summed pairwise repulsion on each agent; pairs beyond ``radius`` are ignored."""
    n = len(pos)
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    mask = (d > 0) & (d <= radius)
    if not mask.any():
        return np.zeros_like(pos)
    s = np.broadcast_to(np.linalg.norm(vel, axis=1)[None, :] * c.anticipation, (n, n))
    b = np.sqrt((d ** 2 + (d - s) ** 2) / 2)
    b = np.where(mask, np.maximum(b, 1e-9), 1.0)
    nvec = np.divide(diff, d[..., None], out=np.zeros_like(diff), where=d[..., None] > 0)
    mag = np.where(mask, c.A / c.B * np.exp(-b / c.B) * (2 * d - s) / (2 * b), 0.0)
    f = mag[..., None] * nvec
    w = anisotropy(np.broadcast_to(e[:, None, :], f.shape), f, c.lam, c.rear)
    return (w[..., None] * f).sum(axis=1)


def wall_forces(pos, e, c: SocialNavConfig) -> np.ndarray:
    out = np.zeros_like(pos)
    for axis in range(2):
        for wall, sign in ((0.0, 1.0), (c.size, -1.0)):
            dist = np.abs(pos[:, axis] - wall)
            f = np.zeros_like(pos)
            f[:, axis] = sign * c.A_wall / c.R_wall * np.exp(-dist / c.R_wall)
            out += anisotropy(e, f, c.lam, c.rear)[:, None] * f
    return out


class Crowd:
    """State and Euler integration of the social-force crowd."""

    def __init__(self, config: SocialNavConfig, rng: np.random.Generator):
        self.config = c = config
        self.rng = rng
        self.v0 = np.maximum(rng.normal(c.v0_mean, c.v0_std, c.n_agents), c.v0_min)
        self.vmax = c.vmax_factor * self.v0
        self.pos = self._spawn()
        self.goal = self._goals(c.n_agents)
        self.w = np.zeros((c.n_agents, 2))
        self.vel = np.zeros((c.n_agents, 2))
        self.arrived = np.zeros(c.n_agents, dtype=bool)

    def _goals(self, k: int) -> np.ndarray:
        c = self.config
        return self.rng.uniform(c.goal_margin, c.size - c.goal_margin, (k, 2))

    def _spawn(self) -> np.ndarray:
        c = self.config
        pts: list = []
        while len(pts) < c.n_agents:
            p = self.rng.uniform(c.goal_margin, c.size - c.goal_margin, 2)
            if all(np.linalg.norm(p - q) >= c.min_separation for q in pts):
                pts.append(p)
        return np.array(pts)

    def desired_velocity(self) -> np.ndarray:
        to_goal = self.goal - self.pos
        dist = np.linalg.norm(to_goal, axis=1, keepdims=True)
        unit = np.divide(to_goal, dist, out=np.zeros_like(to_goal), where=dist > 0)
        v = self.v0[:, None] * unit
        v[self.arrived] = 0.0
        return v

    def step(self, radius: float, stochastic: bool = True) -> None:
        """One Euler step; ``stochastic=False`` drops the noise and never redraws goals."""
        c = self.config
        v_des = self.desired_velocity()
        e = v_des
        force = (v_des - self.vel) / c.tau
        force += social_forces(self.pos, self.vel, e, radius, c)
        if c.walls:
            force += wall_forces(self.pos, e, c)
        if stochastic:
            force += c.noise_std * self.rng.standard_normal(force.shape)
        self.w = self.w + c.dt * force
        speed = np.linalg.norm(self.w, axis=1)
        scale = np.minimum(1.0, np.divide(self.vmax, speed, out=np.ones_like(speed), where=speed > 0))
        self.vel = self.w * scale[:, None]
        self.pos = self.pos + c.dt * self.vel
        self._contain()
        self._check_goals(stochastic)

    def _contain(self) -> None:
        c = self.config
        for axis in range(2):
            low = self.pos[:, axis] < 0
            high = self.pos[:, axis] > c.size
            self.pos[low, axis] = 0.0
            self.pos[high, axis] = c.size
            for sel, sign in ((low, -1.0), (high, 1.0)):
                outward = sign * self.w[sel, axis] > 0
                idx = np.flatnonzero(sel)[outward]
                self.w[idx, axis] = 0.0
                self.vel[idx, axis] = 0.0

    def _check_goals(self, reassign: bool) -> None:
        reached = np.linalg.norm(self.goal - self.pos, axis=1) < self.config.arrival
        if self.config.reassign_goals and reassign:
            k = int(reached.sum())
            if k:
                self.goal[reached] = self._goals(k)
        else:
            self.arrived |= reached

    def copy(self) -> "Crowd":
        other = object.__new__(Crowd)
        other.__dict__.update(self.__dict__)
        for name in ("pos", "goal", "w", "vel", "arrived"):
            setattr(other, name, getattr(self, name).copy())
        return other


def constant_velocity_forecast(history, horizon: int, dt: float, velocity_window: int = 3,
                               min_history: int = 10) -> np.ndarray:
    """Extrapolate the last position with the mean velocity of the last few steps."""
    h = np.asarray(history, dtype=float).reshape(-1, 2)
    if len(h) < min_history:
        raise InsufficientHistory(f"need {min_history} past positions, got {len(h)}")
    v = (h[-1] - h[-1 - velocity_window]) / (velocity_window * dt)
    return h[-1] + horizon * dt * v


def nominal_model_forecast(crowd: Crowd, ego: int, horizon: int, radius: float) -> np.ndarray:
    """Roll a noise-free copy of the crowd forward under the nominal radius."""
    sim = crowd.copy()
    for _ in range(horizon):
        sim.step(radius, stochastic=False)
    return sim.pos[ego].copy()


PREDICTORS = ("cv", "nominal")


class SocialNavEnv(Environment):
    """Ego-agent forecasts ``horizon`` steps ahead inside a social-force crowd.

    The observation at ``t`` pairs the forecast made at ``t`` with the ego
    position at ``t + horizon``, so the simulator runs ``horizon`` steps ahead.
    """

    name = "socialnav"

    def __init__(self, config: SocialNavConfig = SocialNavConfig(), calibration: int = 0,
                 seed: int = 0, length: int | None = None):
        config.validate()
        self.config = config
        super().__init__(config.length if length is None else length, calibration, seed)

    def _reset(self) -> None:
        c = self.config
        self.crowd = Crowd(c, self.rng)
        self.sim_t = self.t - c.history
        self.track: deque = deque(maxlen=c.history + c.horizon + 1)
        self.track.append(self.crowd.pos[c.ego].copy())
        self.snapshots: deque = deque([self.crowd.copy()], maxlen=c.horizon + 1)
        while self.sim_t < self.t + c.horizon:
            self._advance()

    def _advance(self) -> None:
        self.crowd.step(self.config.radius(self.sim_t))
        self.sim_t += 1
        self.track.append(self.crowd.pos[self.config.ego].copy())
        if self.config.predictor == "nominal":
            self.snapshots.append(self.crowd.copy())

    def _step(self) -> Observation:
        c = self.config
        track = list(self.track)
        past = track[: len(track) - c.horizon]
        if c.predictor == "cv":
            y_hat = constant_velocity_forecast(past, c.horizon, c.dt, c.velocity_window, c.history)
        else:
            radius = c.radius_start if c.nominal_radius is None else c.nominal_radius
            y_hat = nominal_model_forecast(self.snapshots[0], c.ego, c.horizon, radius)
        y = track[-1]
        obs = Observation(self.t, np.asarray(past[-1]), np.asarray(y), y_hat)
        self._advance()
        return obs
