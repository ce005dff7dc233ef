"""Linearised multirotor tracking a figure-eight under actuator degradation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Observation
from ..errors import InvalidInput
from .base import Environment

# State layout.
X, XD, Y, YD, Z, ZD, PSI, PSID, THETA, THETAD, DELTA, DELTAD = range(12)
# Planner sub-state: everything except altitude, driven by the three torques.
PLAN_IDX = np.array([X, XD, Y, YD, PSI, PSID, THETA, THETAD, DELTA, DELTAD])


@dataclass(frozen=True)
class MultirotorConfig:
    dt: float = 0.1
    g: float = 9.81
    drift: float = 5e-4
    diffusion: float = 2.5e-4
    attitude_limit: float = 0.3
    amplitude: float = 3.0
    omega: float = 0.25
    z_ref: float = 2.0
    kp_z: float = 4.0
    kd_z: float = 3.0
    samples: int = 30
    horizon: int = 35
    noise: float = 0.5
    noise_correlation: float = 0.0
    temperature: float = 100.0
    w_pos: float = 10.0
    w_vel: float = 1.0
    w_att: float = 5.0
    w_ctrl: float = 0.1
    degrade_calibration: bool = False
    length: int = 6000

    def validate(self) -> None:
        for name in ("dt", "g", "attitude_limit", "omega", "horizon", "samples"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        for name in ("drift", "diffusion", "noise", "temperature"):
            if getattr(self, name) < 0:
                raise InvalidInput(f"{name} must be nonnegative")
        if not 0 <= self.noise_correlation < 1:
            raise InvalidInput("noise_correlation must lie in [0, 1)")

    def reference(self, t) -> np.ndarray:
        """Planar reference ``(x, y, vx, vy)`` at step(s) ``t``."""
        s = np.asarray(t, dtype=float) * self.dt
        A, w = self.amplitude, self.omega
        return np.stack([
            A * np.sin(w * s),
            A * np.sin(2 * w * s),
            A * w * np.cos(w * s),
            2 * A * w * np.cos(2 * w * s),
        ], axis=-1)


def hover_state(z: float = 2.0) -> np.ndarray:
    s = np.zeros(12)
    s[Z] = z
    return s


def wrap_angle(a):
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


def dynamics_step(state, u, health, c: MultirotorConfig) -> np.ndarray:
    """Semi-implicit Euler step: rates first, then positions with the new rates."""
    s = np.array(state, dtype=float)
    ue = np.asarray(health, float) * np.asarray(u, float)
    dt = c.dt
    s[XD] += dt * c.g * s[THETA]
    s[YD] += dt * -c.g * s[DELTA]
    s[ZD] += dt * (ue[0] - c.g)
    s[THETAD] += dt * ue[1]
    s[DELTAD] += dt * ue[2]
    s[PSID] += dt * ue[3]
    for pos, vel in ((X, XD), (Y, YD), (Z, ZD), (PSI, PSID), (THETA, THETAD), (DELTA, DELTAD)):
        s[pos] += dt * s[vel]
    lim = c.attitude_limit
    for ang, rate in ((THETA, THETAD), (DELTA, DELTAD)):
        if s[ang] > lim:
            s[ang] = lim
            s[rate] = min(s[rate], 0.0)
        elif s[ang] < -lim:
            s[ang] = -lim
            s[rate] = max(s[rate], 0.0)
    s[PSI] = float(wrap_angle(s[PSI]))
    return s


def altitude_thrust(state, c: MultirotorConfig) -> float:
    return c.g + c.kp_z * (c.z_ref - state[Z]) - c.kd_z * state[ZD]


def correlated_noise(rng, n: int, horizon: int, m: int, rho: float) -> np.ndarray:
    """Unit-variance Gaussian sequences with AR(1) correlation ``rho`` along the horizon."""
    z = rng.standard_normal((n, horizon, m))
    if rho == 0:
        return z
    out = np.empty_like(z)
    out[:, 0] = z[:, 0]
    k = math.sqrt(1 - rho * rho)
    for h in range(1, horizon):
        out[:, h] = rho * out[:, h - 1] + k * z[:, h]
    return out


class MppiPlanner:
    """Sampling planner over the three torques using the nominal linear model.

    The nominal model has no attitude clipping, so rollouts over the horizon
    reduce to one affine map of the stacked control sequence.
    """

    def __init__(self, config: MultirotorConfig):
        self.config = c = config
        n, m, H = len(PLAN_IDX), 3, c.horizon
        A, B = self._discrete(c)
        Phi = np.empty((H, n, n))
        G = np.zeros((H, n, H, m))
        Ak = np.eye(n)
        for k in range(H):
            Ak = A @ Ak
            Phi[k] = Ak
        for k in range(H):
            for j in range(k + 1):
                G[k, :, j, :] = np.linalg.matrix_power(A, k - j) @ B
        self.Phi = Phi.reshape(H * n, n)
        self.G = G.reshape(H * n, H * m)
        self.nominal = np.zeros((H, m))

    @staticmethod
    def _discrete(c: MultirotorConfig):
        # Local indices inside PLAN_IDX.
        x, xd, y, yd, psi, psid, th, thd, de, ded = range(10)
        dt, g = c.dt, c.g
        A = np.eye(10)
        B = np.zeros((10, 3))
        A[xd, th] = dt * g
        A[yd, de] = -dt * g
        # Positions integrate the updated rates.
        for pos, vel in ((x, xd), (y, yd), (psi, psid), (th, thd), (de, ded)):
            A[pos] += dt * A[vel]
        B[thd, 0] = dt
        B[ded, 1] = dt
        B[psid, 2] = dt
        for pos, vel in ((th, thd), (de, ded), (psi, psid)):
            B[pos] += dt * B[vel]
        return A, B

    def reset(self) -> None:
        self.nominal[:] = 0.0

    def costs(self, state, t: int, controls) -> np.ndarray:
        c = self.config
        H = c.horizon
        s0 = np.asarray(state, float)[PLAN_IDX]
        U = np.asarray(controls, float).reshape(len(controls), -1)
        traj = (U @ self.G.T + self.Phi @ s0).reshape(len(U), H, len(PLAN_IDX))
        ref = c.reference(t + 1 + np.arange(H))
        pos_err = (traj[..., 0] - ref[:, 0]) ** 2 + (traj[..., 2] - ref[:, 1]) ** 2
        vel_err = (traj[..., 1] - ref[:, 2]) ** 2 + (traj[..., 3] - ref[:, 3]) ** 2
        att = traj[..., 4] ** 2 + traj[..., 6] ** 2 + traj[..., 8] ** 2
        ctrl = (U ** 2).sum(axis=1)
        return (c.w_pos * pos_err + c.w_vel * vel_err + c.w_att * att).sum(axis=1) + c.w_ctrl * ctrl

    def act(self, state, t: int, rng: np.random.Generator) -> np.ndarray:
        """Return torques ``(u2, u3, u4)`` and shift the nominal sequence."""
        c = self.config
        eps = c.noise * correlated_noise(rng, c.samples, c.horizon, 3, c.noise_correlation)
        eps[0] = 0.0  # keep the unperturbed nominal in the pool
        cand = self.nominal[None] + eps
        J = self.costs(state, t, cand)
        if c.temperature == 0:
            w = np.zeros(len(J))
            w[int(np.argmin(J))] = 1.0
        else:
            w = np.exp(-(J - J.min()) / c.temperature)
            w /= w.sum()
        self.nominal = np.tensordot(w, cand, axes=1)
        u = self.nominal[0].copy()
        self.nominal = np.vstack([self.nominal[1:], np.zeros((1, 3))])
        return u


def mppi_policy(state, t: int, planner: MppiPlanner, rng: np.random.Generator) -> np.ndarray:
    """Full input ``(u1, u2, u3, u4)``: PD thrust plus MPPI torques."""
    torques = planner.act(state, t, rng)
    return np.array([altitude_thrust(state, planner.config), *torques])


def physics_prior_forecast(state, dt: float) -> np.ndarray:
    """Constant-velocity planar forecast one step ahead."""
    s = np.asarray(state, float)
    return np.array([s[X] + dt * s[XD], s[Y] + dt * s[YD]])


def degrade(health, c: MultirotorConfig, rng: np.random.Generator) -> np.ndarray:
    w = rng.standard_normal(len(health)) * math.sqrt(c.dt)
    return np.clip(health - c.drift * c.dt + c.diffusion * w, 0.0, 1.0)


class MultirotorEnv(Environment):
    """Closed-loop figure-eight tracking; actuators wear out during evaluation.

    Calibration steps (negative ``t``) fly with healthy actuators unless
    ``degrade_calibration`` is set.
    """

    name = "multirotor"

    def __init__(self, config: MultirotorConfig = MultirotorConfig(), calibration: int = 0,
                 seed: int = 0, length: int | None = None):
        config.validate()
        self.config = config
        super().__init__(config.length if length is None else length, calibration, seed)

    def _reset(self) -> None:
        c = self.config
        self.state = hover_state(c.z_ref)
        r = c.reference(self.t)
        self.state[[X, Y, XD, YD]] = r[[0, 1, 2, 3]]
        self.health = np.ones(4)
        self.planner = MppiPlanner(c)

    def _step(self) -> Observation:
        c = self.config
        y_hat = physics_prior_forecast(self.state, c.dt)
        u = mppi_policy(self.state, self.t, self.planner, self.rng)
        x = self.state.copy()
        self.state = dynamics_step(self.state, u, self.health, c)
        if self.t >= 0 or c.degrade_calibration:
            self.health = degrade(self.health, c, self.rng)
        return Observation(self.t, x, self.state[[X, Y]].copy(), y_hat)
