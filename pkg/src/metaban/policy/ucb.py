"""Confidence terms for Meta-Ban.

The theoretical constants of the bound (the meta radius, the additive
approximation error and the user-side log factor) are replaced by plain
scales ``beta``, ``z`` and ``c``; the overall weight is the policy's
``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import StateError
from ..net import NetworkParams, gradient


@dataclass(frozen=True)
class UcbConfig:
    beta: float = 1.0
    z: float = 0.0
    eps1: float = 0.01
    delta: float = 0.1
    c: float = 1.0
    C: float = 1.0

    def __post_init__(self):
        for name in ("beta", "z", "eps1", "c", "C"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def user_ucb_term(mu: int, L: int, k: int, cfg: UcbConfig) -> float:
    """sqrt(2 eps1 / mu) + 3L / sqrt(2 mu) + c sqrt(2 log(C mu k / delta) / mu)."""
    if mu < 1:
        raise StateError("user has no completed update (warm start missing)")
    log_term = math.log(cfg.C * mu * k / cfg.delta) if cfg.C > 0 else 0.0
    return (
        math.sqrt(2.0 * cfg.eps1 / mu)
        + 3.0 * L / math.sqrt(2.0 * mu)
        + cfg.c * math.sqrt(2.0 * max(log_term, 0.0) / mu)
    )


def meta_ucb(x, theta: NetworkParams, theta0: NetworkParams, mu: int, k: int, cfg: UcbConfig) -> float:
    if theta.config.shapes != theta0.config.shapes:
        raise ValueError("parameter shapes differ")
    diff = np.linalg.norm(gradient(theta, x) - gradient(theta0, x))
    return cfg.beta * float(diff) + cfg.z + user_ucb_term(mu, theta.config.depth, k, cfg)
