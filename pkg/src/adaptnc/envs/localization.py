"""RSSI-based planar localization with a mismatched model-based tracker."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Observation
from ..errors import InvalidInput
from .base import Environment

SPEED_OF_LIGHT = 299_792_458.0
MIN_DISTANCE = 1e-2
FADING_EPS = 1e-12


@dataclass(frozen=True)
class LocalizationConfig:
    dt: float = 0.1
    sigma_proc: float = 0.02
    half_width: float = 6.0
    access_points: tuple = ((-5.0, -5.0), (5.0, -5.0), (5.0, 5.0), (-5.0, 5.0))
    p0: float = -30.0
    path_loss_exp: float = 2.2
    sigma_sh: float = 4.0
    rho: float = 0.97
    carrier_hz: float = 2.4e9
    fading: bool = True
    n_sinusoids: int = 16
    v_max: float = 1.0
    a_max: float = 0.5
    filter_alpha: float = 0.25
    filter_beta: float = 0.05
    start_half_width: float = 5.0
    length: int = 6000

    def validate(self) -> None:
        for name in ("dt", "half_width", "path_loss_exp", "carrier_hz", "v_max"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        for name in ("sigma_proc", "sigma_sh", "a_max"):
            if getattr(self, name) < 0:
                raise InvalidInput(f"{name} must be nonnegative")
        if not 0 <= self.rho < 1:
            raise InvalidInput("rho must lie in [0, 1)")
        if self.n_sinusoids < 1:
            raise InvalidInput("n_sinusoids must be >= 1")
        if not 0 < self.start_half_width <= self.half_width:
            raise InvalidInput("start_half_width must lie in (0, half_width]")

    @property
    def aps(self) -> np.ndarray:
        return np.asarray(self.access_points, dtype=float)


def path_loss_rssi(pos, aps, p0: float, n: float) -> np.ndarray:
    """Deterministic log-distance RSSI in dB for every access point."""
    d = np.maximum(np.linalg.norm(np.asarray(aps) - np.asarray(pos, float), axis=1), MIN_DISTANCE)
    return p0 - 10.0 * n * np.log10(d)


def rssi_to_distance(rssi, p0: float, n: float) -> np.ndarray:
    return np.maximum(10.0 ** ((p0 - np.asarray(rssi, float)) / (10.0 * n)), MIN_DISTANCE)


class SumOfSinusoidsFading:
    """Rayleigh fading per access point from equal-power Doppler-shifted paths."""

    def __init__(self, n_links: int, n_sinusoids: int, rng: np.random.Generator):
        self.angles = rng.uniform(0, 2 * math.pi, (n_links, n_sinusoids))
        self.phase = rng.uniform(0, 2 * math.pi, (n_links, n_sinusoids))
        self.n = n_sinusoids

    def advance(self, doppler_hz: float, dt: float) -> None:
        self.phase += 2 * math.pi * doppler_hz * dt * np.cos(self.angles)

    def coefficient(self) -> np.ndarray:
        return np.exp(1j * self.phase).sum(axis=1) / math.sqrt(self.n)

    def db(self) -> np.ndarray:
        return 10.0 * np.log10(np.abs(self.coefficient()) ** 2 + FADING_EPS)


def gauss_newton_fix(
    prior, aps, distances, max_iter: int = 20, max_step: float = 1.0, damping: float = 1e-6,
    tol: float = 1e-6,
) -> np.ndarray:
    """Weighted range multilateration, ``sum (|x - a_i| - d_i)^2 / d_i^2``.

    Levenberg-style damping: a step that raises the cost is rejected and
    the damping grown, so the cost never increases. Stops once an accepted
    step is shorter than ``tol``.
    """
    aps = np.asarray(aps, float)
    d = np.asarray(distances, float)
    w = 1.0 / d ** 2
    x = np.asarray(prior, float).copy()

    def cost(p):
        r = np.sqrt(((p - aps) ** 2).sum(axis=1)) - d
        return float(w @ (r * r))

    c = cost(x)
    lam = damping
    for _ in range(max_iter):
        diff = x - aps
        rng_ = np.maximum(np.sqrt((diff ** 2).sum(axis=1)), MIN_DISTANCE)
        r = rng_ - d
        J = diff / rng_[:, None]
        Jw = J * w[:, None]
        h11, h12, h22 = Jw[:, 0] @ J[:, 0], Jw[:, 0] @ J[:, 1], Jw[:, 1] @ J[:, 1]
        g1, g2 = Jw[:, 0] @ r, Jw[:, 1] @ r
        mu = lam * ((h11 + h22) / 2 + 1e-12)
        a, b_, e = h11 + mu, h12, h22 + mu
        det = a * e - b_ * b_
        step = -np.array([e * g1 - b_ * g2, a * g2 - b_ * g1]) / det
        norm = math.hypot(step[0], step[1])
        if norm > max_step:
            step *= max_step / norm
            norm = max_step
        trial = x + step
        c_new = cost(trial)
        if c_new <= c:
            x, c = trial, c_new
            lam = max(lam / 10.0, damping)
            if norm < tol:
                break
        else:
            lam *= 10.0
    return x


class AlphaBetaTracker:
    """Constant-velocity prior, RSSI multilateration, alpha-beta blend."""

    def __init__(self, config: LocalizationConfig):
        self.config = config
        self.x = np.zeros(2)
        self.v = np.zeros(2)

    def reset(self) -> None:
        self.x = np.zeros(2)
        self.v = np.zeros(2)

    def blend(self, measured) -> None:
        c = self.config
        prior = self.x + c.dt * self.v
        e = np.asarray(measured, float) - prior
        self.x = prior + c.filter_alpha * e
        self.v = self.v + (c.filter_beta / c.dt) * e

    def update(self, rssi) -> np.ndarray:
        c = self.config
        prior = self.x + c.dt * self.v
        d_hat = rssi_to_distance(rssi, c.p0, c.path_loss_exp)
        meas = gauss_newton_fix(prior, c.aps, d_hat)
        self.blend(meas)
        return self.x

    def forecast(self, steps: int = 1) -> np.ndarray:
        return self.x + steps * self.config.dt * self.v


class LocalizationEnv(Environment):
    """Random-acceleration agent observed through four noisy RSSI links.

    Each observation pairs the tracker's one-step forecast with the
    agent's position at the next step.
    """

    name = "localization"

    def __init__(self, config: LocalizationConfig = LocalizationConfig(), calibration: int = 0,
                 seed: int = 0, length: int | None = None):
        config.validate()
        self.config = config
        super().__init__(config.length if length is None else length, calibration, seed)

    def _reset(self) -> None:
        c = self.config
        self.pos = self.rng.uniform(-c.start_half_width, c.start_half_width, 2)
        self.vel = np.zeros(2)
        self.shadow = np.zeros(len(c.aps))
        self.fading = SumOfSinusoidsFading(len(c.aps), c.n_sinusoids, self.rng)
        self.tracker = AlphaBetaTracker(c)

    def rssi(self) -> np.ndarray:
        """Advance shadowing and fading one step and return the RSSI vector."""
        c = self.config
        xi = self.rng.standard_normal(len(c.aps))
        self.shadow = c.rho * self.shadow + math.sqrt(1 - c.rho ** 2) * c.sigma_sh * xi
        out = path_loss_rssi(self.pos, c.aps, c.p0, c.path_loss_exp) + self.shadow
        if c.fading:
            doppler = float(np.linalg.norm(self.vel)) * c.carrier_hz / SPEED_OF_LIGHT
            self.fading.advance(doppler, c.dt)
            out = out + self.fading.db()
        return out

    def move(self) -> None:
        c = self.config
        accel = self.rng.uniform(-c.a_max, c.a_max, 2)
        noise = c.sigma_proc * self.rng.standard_normal(2)
        self.pos = self.pos + c.dt * self.vel
        self.vel = self.vel + c.dt * (accel + noise)
        speed = float(np.linalg.norm(self.vel))
        if speed > c.v_max:
            self.vel *= c.v_max / speed
        for k in range(2):
            if self.pos[k] > c.half_width:
                self.pos[k] = 2 * c.half_width - self.pos[k]
                self.vel[k] = -abs(self.vel[k])
            elif self.pos[k] < -c.half_width:
                self.pos[k] = -2 * c.half_width - self.pos[k]
                self.vel[k] = abs(self.vel[k])

    def _step(self) -> Observation:
        rssi = self.rssi()
        self.tracker.update(rssi)
        y_hat = self.tracker.forecast(1)
        self.move()
        return Observation(self.t, rssi, self.pos.copy(), y_hat)
