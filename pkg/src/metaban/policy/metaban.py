from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import StateError
from ..grouping import GroupAssignment, GroupConfig, infer_groups_matrix
from ..learners import (
    MetaState,
    TrainConfig,
    UserState,
    meta_eval_many,
    meta_update_batch,
    snapshot_gradient,
    user_update,
)
from ..net import (
    NetworkConfig,
    forward_stacked,
    init_params,
    paired_forward_gradient,
    sample_gradients,
)
from .base import Decision, Policy, select_arm
from .ucb import UcbConfig, user_ucb_term


@dataclass(frozen=True)
class MetaBanConfig:
    """Hyperparameters of the Meta-Ban policy.

    ``user_init`` is where each user descent starts: ``"meta"`` (the
    freshly committed meta parameters) or ``"initial"`` (Theta_0).
    ``served_weight`` is the meta-loss weight of the served user; every
    other group member has weight 1. ``l1_anchor="initial"`` measures the
    L1 penalty from Theta_0 instead of from the origin.
    """

    width: int = 100
    depth: int = 2
    alpha: float = 0.1
    lam: float = 0.0
    eta2: float = 0.001
    J2: int = 10
    meta_mode: str = "paper-literal"
    meta_warm_start: str = "previous"
    meta_normalize: bool = False
    l1_anchor: str = "zero"
    user_init: str = "meta"
    served_weight: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    group: GroupConfig = field(default_factory=GroupConfig)
    ucb: UcbConfig = field(default_factory=UcbConfig)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.served_weight < 0:
            raise ValueError("served_weight must be nonnegative")
        if self.user_init not in ("meta", "initial"):
            raise ValueError(f"unknown user_init {self.user_init!r}")
        if self.l1_anchor not in ("zero", "initial"):
            raise ValueError(f"unknown l1_anchor {self.l1_anchor!r}")


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


class MetaBan(Policy):
    """Meta-learner plus per-user learners with per-arm group adaptation.

    For every arm the serving user's relative group is inferred from the
    users' current predictions, the meta parameters are adapted to that
    group, and the arm is scored by the adapted prediction plus
    ``alpha`` times the confidence term. Feedback commits the chosen arm's
    adapted meta parameters and retrains only the served user.
    """

    name = "metaban"

    def __init__(self, users, dim: int, cfg: MetaBanConfig = MetaBanConfig(), seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.net_cfg = NetworkConfig(dim, cfg.width, cfg.depth, seed=seed)
        self.theta0 = init_params(self.net_cfg)
        self.meta = MetaState(
            self.theta0,
            self.theta0,
            eta2=cfg.eta2,
            J2=cfg.J2,
            lam=cfg.lam,
            warm_start=cfg.meta_warm_start,
            mode=cfg.meta_mode,
            normalize=cfg.meta_normalize,
            l1_anchor=cfg.l1_anchor,
        )
        self.users = list(users)
        self.index = {u: i for i, u in enumerate(self.users)}
        self.states = {
            u: UserState.new(u, self.theta0, seed=_derive_seed(seed, i))
            for i, u in enumerate(self.users)
        }
        self._thetas = np.tile(self.theta0.flat, (len(self.users), 1))
        self._snap_grads: dict = {}
        self._pending = None

    @property
    def deterministic_meta(self) -> bool:
        return self.cfg.meta_mode == "meta-eval" or self.cfg.train.minibatch == "full"

    def _user_update(self, u, x, reward):
        st = self.states[u].with_observation(x, reward)
        init = self.meta.params if self.cfg.user_init == "meta" else self.theta0
        st = user_update(st, init, self.cfg.train)
        self.states[u] = st
        self._thetas[self.index[u]] = st.theta.flat
        self._snap_grads.pop(u, None)

    def warm_start(self, user, x, reward):
        self._user_update(user, x, reward)

    def _directions(self, members):
        if self.cfg.meta_mode != "paper-literal" or self.cfg.train.minibatch != "full":
            return None
        for u in members:
            if u not in self._snap_grads:
                self._snap_grads[u] = snapshot_gradient(self.states[u])
        return self._snap_grads

    def user_predictions(self, X) -> np.ndarray:
        """Predictions of every user's deployed parameters, shape (n_users, k)."""
        return forward_stacked(self._thetas, self.net_cfg, X)

    def choose(self, arm_set) -> Decision:
        u = arm_set.user
        X = arm_set.arms
        k = X.shape[0]
        if u not in self.states:
            raise ValueError(f"unknown user {u!r}")
        if any(st.n_obs == 0 for st in self.states.values()):
            raise StateError("warm start incomplete: some user has no observation")
        mu = self.states[u].mu
        preds = self.user_predictions(X)
        masks = infer_groups_matrix(preds, self.index[u], self.cfg.group.threshold)

        base = replace(self.meta, weights={u: self.cfg.served_weight})
        groups = [
            GroupAssignment(u, i, frozenset(self.users[j] for j in np.flatnonzero(masks[i])))
            for i in range(k)
        ]
        if self.cfg.meta_mode == "meta-eval" and self.cfg.train.minibatch == "full":
            # identical masks share one update; distinct ones advance together
            keys = [masks[i].tobytes() for i in range(k)]
            first = {key: i for i, key in reversed(list(enumerate(keys)))}
            order = sorted(first.values())
            updated = meta_eval_many(base, [groups[i].members for i in order], self.states)
            by_key = {keys[i]: m for i, m in zip(order, updated)}
            metas = [by_key[key] for key in keys]
        else:
            metas, cache = [], {}
            for i in range(k):
                key = masks[i].tobytes()
                if self.deterministic_meta and key in cache:
                    metas.append(cache[key])
                    continue
                rng = np.random.default_rng((self.seed, arm_set.t, i))
                m = meta_update_batch(
                    base, groups[i].members, self.states, self.cfg.train, rng,
                    directions=self._directions(groups[i].members),
                )
                cache[key] = m
                metas.append(m)

        stack = np.stack([m.params.flat for m in metas])
        exploit, G = paired_forward_gradient(stack, self.net_cfg, X)
        G0 = sample_gradients(self.theta0, X)
        ucb = (
            self.cfg.ucb.beta * np.linalg.norm(G - G0, axis=1)
            + self.cfg.ucb.z
            + user_ucb_term(mu, self.cfg.depth, k, self.cfg.ucb)
        )
        total = exploit + self.cfg.alpha * ucb
        chosen = select_arm(total)
        decision = Decision(chosen, exploit, ucb, total, groups, metas[chosen])
        self._pending = (u, arm_set.t, X[chosen], decision)
        return decision

    def learn(self, user, arm, reward):
        if self._pending is None:
            raise StateError("learn called without a pending decision")
        u, _, x, decision = self._pending
        if user != u or arm != decision.chosen:
            raise ValueError("feedback does not match the pending decision")
        self._pending = None
        self.meta = decision.meta
        self._user_update(u, x, reward)
