"""Dynamically tuned adaptive conformal inference (a bank of ACI experts).

Each expert runs the ACI recursion ``a <- a + gamma * (alpha - err)`` with
its own step size; the experts are mixed by exponential weights on the
pinball loss of their miscoverage levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RollingWindow, beta_of, empirical_quantile
from .errors import InvalidInput

DEFAULT_GAMMAS = (0.002, 0.004, 0.008, 0.016, 0.032, 0.064)


def default_eta(k: int, window: int) -> float:
    return math.sqrt((math.log(2 * k * window) + 1) / window)


def default_sigma(window: int) -> float:
    return 1.0 / (2 * window)


def pinball_loss(beta, theta, alpha):
    """``alpha * (beta - theta) - min(0, beta - theta)``; vectorises over numpy input."""
    diff = np.subtract(beta, theta)
    return alpha * diff - np.minimum(0.0, diff)


@dataclass(frozen=True)
class ExpertBank:
    gammas: np.ndarray
    alphas: np.ndarray
    weights: np.ndarray
    eta: float
    sigma: float
    target_alpha: float

    @classmethod
    def fresh(cls, gammas=DEFAULT_GAMMAS, target_alpha=0.1, eta=None, sigma=None, window=500):
        g = np.asarray(gammas, dtype=float)
        k = len(g)
        bank = cls(
            gammas=g,
            alphas=np.full(k, float(target_alpha)),
            weights=np.full(k, 1.0 / k),
            eta=default_eta(k, window) if eta is None else float(eta),
            sigma=default_sigma(window) if sigma is None else float(sigma),
            target_alpha=float(target_alpha),
        )
        bank.validate()
        return bank

    @property
    def k(self) -> int:
        return len(self.gammas)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def validate(self) -> None:
        g = self.gammas
        if g.ndim != 1 or len(g) == 0:
            raise InvalidInput("need at least one expert")
        if np.any(g <= 0):
            raise InvalidInput("expert gammas must be positive")
        if np.any(np.diff(g) <= 0):
            raise InvalidInput("expert gammas must be strictly increasing")
        if np.any(g[1:] / g[:-1] > 2 + 1e-12):
            raise InvalidInput("consecutive expert gammas may differ by at most a factor 2")
        if not 0 < self.target_alpha < 1:
            raise InvalidInput("target_alpha must lie in (0, 1)")
        if self.eta < 0 or not 0 <= self.sigma < 1:
            raise InvalidInput("eta must be >= 0 and sigma in [0, 1)")
        if np.any(self.weights <= 0):
            raise InvalidInput("expert weights must be strictly positive")


def aggregate_alpha(bank: ExpertBank) -> float:
    return float(np.dot(bank.probabilities, bank.alphas))


def update(bank: ExpertBank, beta_t: float, err_per_expert, err_aggregate=None) -> ExpertBank:
    """One DtACI step: reweight, mix, then move every expert's level.

    ``beta_t`` is on the miscoverage scale (the largest level whose region
    still covers the outcome). ``err_aggregate`` does not enter the update;
    it is accepted so callers can pass the full observation.
    """
    err = np.asarray(err_per_expert, dtype=float)
    if err.shape != bank.alphas.shape:
        raise InvalidInput(f"expected {bank.k} expert errors, got {err.shape}")
    loss = pinball_loss(beta_t, bank.alphas, bank.target_alpha)
    w_bar = bank.weights * np.exp(-bank.eta * loss)
    total = w_bar.sum()
    w_next = (1 - bank.sigma) * w_bar + total * bank.sigma / bank.k
    w_next = w_next / w_next.sum()
    # Guard against underflow so weights stay strictly positive.
    w_next = np.maximum(w_next, np.finfo(float).tiny)
    alphas = bank.alphas + bank.gammas * (bank.target_alpha - err)
    return ExpertBank(bank.gammas, alphas, w_next, bank.eta, bank.sigma, bank.target_alpha)


def expert_errs(bank: ExpertBank, window: RollingWindow, s_t: float):
    """Per-expert and aggregate miss indicators for score ``s_t``."""
    errs = [int(s_t > empirical_quantile(window, 1 - a)) for a in bank.alphas]
    agg = int(s_t > empirical_quantile(window, 1 - aggregate_alpha(bank)))
    return errs, agg


def observed_level(window: RollingWindow, s_t: float) -> float:
    """Miscoverage-scale observation fed to the pinball loss: ``1 - rank``."""
    return 1.0 - beta_of(window, s_t)


@dataclass(frozen=True)
class StepOutcome:
    alpha_bar: float
    q: float
    err: int
    beta: float


def step(bank: ExpertBank, window: RollingWindow, s_t: float):
    """Threshold, coverage and bank update for one score against ``window``.

    The window is not modified; the caller appends ``s_t`` afterwards.
    """
    alpha_bar = aggregate_alpha(bank)
    q = empirical_quantile(window, 1 - alpha_bar)
    beta = observed_level(window, s_t)
    errs = [int(s_t > empirical_quantile(window, 1 - a)) for a in bank.alphas]
    err = int(s_t > q)
    new_bank = update(bank, beta, errs, err)
    return new_bank, StepOutcome(alpha_bar, q, err, beta)
