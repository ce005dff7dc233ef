"""Seeded benchmark streams and their point predictors."""

from __future__ import annotations

import dataclasses

from ..errors import InvalidInput
from .base import Environment
from .gmm import GmmStream, GmmStreamConfig, gmm_alpha_star
from .localization import LocalizationConfig, LocalizationEnv
from .multirotor import MultirotorConfig, MultirotorEnv
from .socialnav import SocialNavConfig, SocialNavEnv

ENVIRONMENTS = {
    "gmm": (GmmStream, GmmStreamConfig),
    "localization": (LocalizationEnv, LocalizationConfig),
    "socialnav": (SocialNavEnv, SocialNavConfig),
    "multirotor": (MultirotorEnv, MultirotorConfig),
}


def config_fields(name: str) -> set:
    return {f.name for f in dataclasses.fields(ENVIRONMENTS[name][1])}


def make_env(name: str, params: dict | None = None, calibration: int = 0, seed: int = 0,
             length: int | None = None) -> Environment:
    """Build an environment from its name and a flat dict of config overrides."""
    if name not in ENVIRONMENTS:
        raise InvalidInput(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}")
    cls, cfg_cls = ENVIRONMENTS[name]
    params = dict(params or {})
    unknown = set(params) - config_fields(name)
    if unknown:
        raise InvalidInput(f"unknown {name} parameters: {sorted(unknown)}")
    for key, value in params.items():
        if isinstance(value, list):
            params[key] = _as_tuple(value)
    return cls(cfg_cls(**params), calibration=calibration, seed=seed, length=length)


def _as_tuple(value):
    return tuple(_as_tuple(v) if isinstance(v, list) else v for v in value)


__all__ = [
    "ENVIRONMENTS",
    "Environment",
    "GmmStream",
    "GmmStreamConfig",
    "LocalizationConfig",
    "LocalizationEnv",
    "MultirotorConfig",
    "MultirotorEnv",
    "SocialNavConfig",
    "SocialNavEnv",
    "gmm_alpha_star",
    "make_env",
]
