from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import StateError
from .base import Decision, Policy, select_arm


@dataclass(frozen=True)
class LinUCBConfig:
    alpha: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.lam <= 0:
            raise ValueError("need alpha >= 0 and lam > 0")


class LinUCB(Policy):
    """Per-user ridge regression on arm features with an optimism bonus.

    The inverse design matrix is kept up to date with Sherman-Morrison.
    """

    name = "linucb"

    def __init__(self, users, dim: int, cfg: LinUCBConfig = LinUCBConfig(), seed: int = 0):
        self.cfg = cfg
        self.dim = dim
        self.A_inv = {u: np.eye(dim) / cfg.lam for u in users}
        self.b = {u: np.zeros(dim) for u in users}
        self._pending = None

    def theta(self, user) -> np.ndarray:
        return self.A_inv[user] @ self.b[user]

    def _update(self, user, x, reward):
        x = np.asarray(x, dtype=np.float64)
        Ainv = self.A_inv[user]
        Ax = Ainv @ x
        self.A_inv[user] = Ainv - np.outer(Ax, Ax) / (1.0 + x @ Ax)
        self.b[user] = self.b[user] + reward * x

    def warm_start(self, user, x, reward):
        self._update(user, x, reward)

    def choose(self, arm_set) -> Decision:
        u = arm_set.user
        if u not in self.A_inv:
            raise ValueError(f"unknown user {u!r}")
        X = arm_set.arms
        exploit = X @ self.theta(u)
        width = np.sqrt(np.einsum("ki,ij,kj->k", X, self.A_inv[u], X))
        bonus = self.cfg.alpha * width
        total = exploit + bonus
        chosen = select_arm(total)
        self._pending = (u, X[chosen], chosen)
        return Decision(chosen, exploit, bonus, total)

    def learn(self, user, arm, reward):
        if self._pending is None:
            raise StateError("learn called without a pending decision")
        u, x, chosen = self._pending
        if user != u or arm != chosen:
            raise ValueError("feedback does not match the pending decision")
        self._pending = None
        self._update(u, x, reward)
