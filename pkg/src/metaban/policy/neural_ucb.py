"""Neural UCB baselines: one shared network (ONE) or one network per user (IND).

Exploration uses the gradient features g = d f(x) / d theta with a
diagonal design matrix A = lam * I + sum diag(g g^T) over played arms, so
the bonus is alpha * sqrt(sum g^2 / diag(A)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import StateError
from ..net import NetworkConfig, init_params, loss_grad_flat, forward_batch, sample_gradients
from .base import Decision, Policy, select_arm


@dataclass(frozen=True)
class NeuralUCBConfig:
    width: int = 100
    depth: int = 2
    alpha: float = 0.1
    lam: float = 1.0
    eta: float = 0.01
    J: int = 20
    batch_size: int = 64

    def __post_init__(self):
        if self.alpha < 0 or self.lam <= 0:
            raise ValueError("need alpha >= 0 and lam > 0")
        if self.J < 1 or self.batch_size < 1:
            raise ValueError("J and batch_size must be >= 1")


class _Model:
    def __init__(self, theta0, lam):
        self.params = theta0
        self.A = np.full(theta0.flat.size, float(lam))
        self.X: list[np.ndarray] = []
        self.r: list[float] = []


class NeuralUCB(Policy):
    def __init__(self, users, dim: int, variant: str = "ONE",
                 cfg: NeuralUCBConfig = NeuralUCBConfig(), seed: int = 0):
        variant = variant.upper()
        if variant not in ("ONE", "IND"):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.name = f"neuucb-{variant.lower()}"
        self.cfg = cfg
        self.users = list(users)
        self.net_cfg = NetworkConfig(dim, cfg.width, cfg.depth, seed=seed)
        self.theta0 = init_params(self.net_cfg)
        self.rng = np.random.default_rng((seed, 7))
        self.models: dict = {}
        self._pending = None

    def _model(self, user) -> _Model:
        key = None if self.variant == "ONE" else user
        if key not in self.models:
            self.models[key] = _Model(self.theta0, self.cfg.lam)
        return self.models[key]

    def bonus(self, model: _Model, G: np.ndarray) -> np.ndarray:
        return self.cfg.alpha * np.sqrt((G * G / model.A).sum(axis=1))

    def _train(self, model: _Model):
        X = np.asarray(model.X)
        r = np.asarray(model.r)
        n = r.size
        theta = model.params.flat.copy()
        for _ in range(self.cfg.J):
            if n > self.cfg.batch_size:
                idx = self.rng.choice(n, size=self.cfg.batch_size, replace=False)
                _, g = loss_grad_flat(theta, self.net_cfg, X[idx], r[idx])
            else:
                _, g = loss_grad_flat(theta, self.net_cfg, X, r)
            theta -= self.cfg.eta * g
        model.params = model.params.replace_flat(theta)

    def _observe(self, model, x, g, reward):
        model.A += g * g
        model.X.append(np.asarray(x, dtype=np.float64))
        model.r.append(float(reward))
        self._train(model)

    def warm_start(self, user, x, reward):
        model = self._model(user)
        g = sample_gradients(model.params, np.atleast_2d(x))[0]
        self._observe(model, x, g, reward)

    def choose(self, arm_set) -> Decision:
        model = self._model(arm_set.user)
        if not model.r:
            raise StateError(f"warm start missing for user {arm_set.user!r}")
        X = arm_set.arms
        exploit = forward_batch(model.params, X)
        G = sample_gradients(model.params, X)
        bonus = self.bonus(model, G)
        total = exploit + bonus
        chosen = select_arm(total)
        self._pending = (arm_set.user, X[chosen], G[chosen], chosen)
        return Decision(chosen, exploit, bonus, total)

    def learn(self, user, arm, reward):
        if self._pending is None:
            raise StateError("learn called without a pending decision")
        u, x, g, chosen = self._pending
        if user != u or arm != chosen:
            raise ValueError("feedback does not match the pending decision")
        self._pending = None
        self._observe(self._model(user), x, g, reward)
