"""User learners and the meta learner.

A user learner is trained by plain gradient descent on the user's own
history and keeps every trained parameter vector it has produced (the
snapshot store); the parameters it deploys are a uniform draw from that
store. The meta learner is moved by gradients of the user losses of the
members of a group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import StateError
from .net import NetworkParams, loss_grad_flat, loss_grad_stacked

UNIT_TOL = 1e-6


@dataclass(frozen=True)
class Observation:
    x: np.ndarray
    r: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
            raise ValueError(f"arm vector must have unit norm, got {np.linalg.norm(x):.6g}")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"reward must lie in [0, 1], got {self.r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", float(self.r))


def stack_observations(data: Sequence[Observation]) -> tuple[np.ndarray, np.ndarray]:
    if len(data) == 0:
        raise ValueError("no observations")
    return np.stack([o.x for o in data]), np.array([o.r for o in data])


@dataclass(frozen=True)
class TrainConfig:
    """User-side training settings.

    ``minibatch`` is ``"full"`` or ``"subset"``; a subset draws
    ``ceil(fraction * n)`` rows without replacement at every iteration.
    ``snapshot_mode="latest"`` deploys the newest snapshot instead of a
    uniform draw from the store. ``stop_at_target`` ends the descent early
    once the full-history loss is at most ``eps1``. ``normalize`` divides
    ``eta1`` by the number of rows in each step, so the step is taken on the
    mean loss and its size does not grow with the history.
    """

    eta1: float = 0.01
    J1: int = 20
    minibatch: str = "full"
    fraction: float = 0.5
    eps1: float = 0.01
    eps2: float = 0.1
    snapshot_mode: str = "uniform"
    stop_at_target: bool = False
    normalize: bool = False

    def __post_init__(self):
        if not self.eta1 >= 0:
            raise ValueError("eta1 must be nonnegative")
        if self.J1 < 1:
            raise ValueError("J1 must be >= 1")
        if self.minibatch not in ("full", "subset"):
            raise ValueError(f"unknown minibatch policy {self.minibatch!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if not 0.0 < self.eps1 <= self.eps2 <= 1.0:
            raise ValueError("need 0 < eps1 <= eps2 <= 1")
        if self.snapshot_mode not in ("uniform", "latest"):
            raise ValueError(f"unknown snapshot mode {self.snapshot_mode!r}")


@dataclass(frozen=True)
class UserState:
    user: Hashable
    X: np.ndarray
    r: np.ndarray
    mu: int
    theta: NetworkParams
    snapshots: tuple[NetworkParams, ...]
    seed: int = 0

    @classmethod
    def new(cls, user, theta0: NetworkParams, seed: int = 0) -> "UserState":
        d = theta0.config.input_dim
        return cls(user, np.empty((0, d)), np.empty(0), 0, theta0, (theta0,), seed)

    @property
    def history(self) -> list[Observation]:
        return [Observation(x, r) for x, r in zip(self.X, self.r)]

    @property
    def n_obs(self) -> int:
        return self.r.size

    @property
    def latest(self) -> NetworkParams:
        return self.snapshots[-1]

    def with_observation(self, x, r: float) -> "UserState":
        obs = Observation(x, r)
        return replace(
            self, X=np.vstack([self.X, obs.x[None, :]]), r=np.append(self.r, obs.r)
        )


def _subset(n: int, cfg_minibatch: str, fraction: float, rng) -> np.ndarray | None:
    if cfg_minibatch == "full":
        return None
    size = max(1, math.ceil(fraction * n))
    return np.sort(rng.choice(n, size=size, replace=False))


def user_loss(params: NetworkParams, data: Sequence[Observation]) -> float:
    """0.5 * sum of squared prediction errors over ``data``."""
    X, r = stack_observations(data)
    if X.shape[1] != params.config.input_dim:
        raise ValueError("observation dimension does not match the network")
    loss, _ = loss_grad_flat(params.flat, params.config, X, r)
    return loss


def user_update(
    state: UserState, init: NetworkParams, cfg: TrainConfig, rng=None
) -> UserState:
    """Run J1 descent steps from ``init`` on the user's history.

    The result is appended to the snapshot store, ``mu`` is incremented, and
    the deployed parameters are redrawn from the store. Without an explicit
    ``rng`` the draw is seeded from ``(state.seed, state.mu)``.
    """
    if state.n_obs == 0:
        raise ValueError(f"user {state.user!r} has no history")
    if rng is None:
        rng = np.random.default_rng((state.seed, state.mu))
    config = init.config
    theta = init.flat.copy()
    X, r = state.X, state.r
    n = r.size
    for _ in range(cfg.J1):
        idx = _subset(n, cfg.minibatch, cfg.fraction, rng)
        if idx is None:
            loss, g = loss_grad_flat(theta, config, X, r)
            if cfg.stop_at_target and loss <= cfg.eps1:
                break
        else:
            if cfg.stop_at_target and loss_grad_flat(theta, config, X, r)[0] <= cfg.eps1:
                break
            _, g = loss_grad_flat(theta, config, X[idx], r[idx])
        step = cfg.eta1 / (n if idx is None else idx.size) if cfg.normalize else cfg.eta1
        theta -= step * g
    snap = NetworkParams(config, theta)
    snapshots = state.snapshots + (snap,)
    if cfg.snapshot_mode == "latest":
        deployed = snap
    else:
        deployed = snapshots[int(rng.integers(len(snapshots)))]
    return replace(state, mu=state.mu + 1, theta=deployed, snapshots=snapshots)


def sign(v: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1."""
    return np.where(v >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class MetaState:
    """Meta-learner parameters plus update settings.

    ``warm_start`` selects the starting point of every meta update:
    ``"previous"`` (the current parameters) or ``"initial"`` (Theta_0).
    ``mode="paper-literal"`` differentiates the user losses at the users'
    latest snapshots; ``mode="meta-eval"`` differentiates them at the
    current meta iterate on the pooled group data. ``normalize`` divides
    every step by the total weight of the pooled samples, so ``eta2`` no
    longer has to shrink as the group history grows. ``l1_anchor`` is the
    point the L1 penalty pulls toward: ``"zero"`` or ``"initial"``
    (Theta_0, with a zero subgradient exactly at the anchor).
    """

    params: NetworkParams
    theta0: NetworkParams
    eta2: float = 0.001
    J2: int = 10
    lam: float = 0.0
    weights: Mapping[Hashable, float] = field(default_factory=dict)
    warm_start: str = "previous"
    mode: str = "paper-literal"
    normalize: bool = False
    l1_anchor: str = "zero"

    def __post_init__(self):
        if not self.eta2 >= 0:
            raise ValueError("eta2 must be nonnegative")
        if self.J2 < 1:
            raise ValueError("J2 must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("user weights must be nonnegative")
        if self.warm_start not in ("previous", "initial"):
            raise ValueError(f"unknown warm start {self.warm_start!r}")
        if self.mode not in ("paper-literal", "meta-eval"):
            raise ValueError(f"unknown meta mode {self.mode!r}")
        if self.l1_anchor not in ("zero", "initial"):
            raise ValueError(f"unknown L1 anchor {self.l1_anchor!r}")

    def weight(self, user) -> float:
        return float(self.weights.get(user, 1.0))

    @property
    def start(self) -> NetworkParams:
        return self.params if self.warm_start == "previous" else self.theta0

    def l1_sign(self, v: np.ndarray) -> np.ndarray:
        """Subgradient of the L1 penalty at ``v`` (rows of a 2-D array too)."""
        if self.l1_anchor == "zero":
            return sign(v)
        return np.sign(v - self.theta0.flat)


def meta_loss(
    snapshots: Mapping[Hashable, NetworkParams],
    data: Mapping[Hashable, Sequence[Observation]],
    weights: Mapping[Hashable, float],
    lam: float,
    m: int,
    anchor: NetworkParams | None = None,
) -> float:
    """Weighted user losses plus the L1 penalty, measured from ``anchor`` if given."""
    if set(snapshots) != set(data):
        raise ValueError("snapshot and data keys differ")
    total = 0.0
    for u, theta in snapshots.items():
        offset = theta.flat if anchor is None else theta.flat - anchor.flat
        total += weights.get(u, 1.0) * user_loss(theta, data[u])
        total += lam / math.sqrt(m) * float(np.abs(offset).sum())
    return total


def _group_members(group, user_states):
    members = sorted(group)
    if not members:
        raise ValueError("empty group")
    for u in members:
        if u not in user_states:
            raise ValueError(f"no state for user {u!r}")
        if user_states[u].n_obs == 0:
            raise StateError(f"group member {u!r} has no history")
    return members


def snapshot_gradient(state: UserState) -> np.ndarray:
    """Gradient of the full-history user loss at the latest snapshot."""
    snap = state.latest
    _, g = loss_grad_flat(snap.flat, snap.config, state.X, state.r)
    return g


def meta_update_batch(
    meta: MetaState,
    group,
    user_states: Mapping[Hashable, UserState],
    cfg: TrainConfig,
    rng=None,
    directions: Mapping[Hashable, np.ndarray] | None = None,
) -> MetaState:
    """J2 descent steps of the meta parameters driven by ``group``'s losses.

    ``directions`` may carry precomputed ``snapshot_gradient`` values; they
    are only used in paper-literal mode with full minibatches, where the
    per-user direction does not change across iterations.
    """
    members = _group_members(group, user_states)
    config = meta.params.config
    m = config.width
    l1 = meta.lam / math.sqrt(m)
    if rng is None:
        rng = np.random.default_rng(0)
    theta = meta.start.flat.copy()
    eta = meta.eta2
    if meta.normalize:
        eta /= sum(meta.weight(u) * user_states[u].n_obs for u in members)

    if meta.mode == "paper-literal" and cfg.minibatch == "full":
        direction = np.zeros_like(theta)
        for u in members:
            if directions is not None and u in directions:
                gu = directions[u]
            else:
                gu = snapshot_gradient(user_states[u])
            direction += meta.weight(u) * gu
            if l1:
                direction += l1 * meta.l1_sign(user_states[u].latest.flat)
        # Constant across iterations: one fused step of J2 * eta2.
        for _ in range(meta.J2):
            theta -= eta * direction
        return replace(meta, params=NetworkParams(config, theta))

    if meta.mode == "meta-eval" and cfg.minibatch == "full":
        return meta_eval_many(meta, [group], user_states)[0]

    if meta.mode == "meta-eval":
        Xs = [user_states[u].X for u in members]
        rs = [user_states[u].r for u in members]
        ws = [np.full(user_states[u].n_obs, meta.weight(u)) for u in members]
        X, r, w = np.vstack(Xs), np.concatenate(rs), np.concatenate(ws)
        offsets = np.cumsum([0] + [x.shape[0] for x in Xs])
        for _ in range(meta.J2):
            if cfg.minibatch == "full":
                _, g = loss_grad_flat(theta, config, X, r, w)
            else:
                idx = np.concatenate([
                    offsets[j] + _subset(offsets[j + 1] - offsets[j], "subset", cfg.fraction, rng)
                    for j in range(len(members))
                ])
                _, g = loss_grad_flat(theta, config, X[idx], r[idx], w[idx])
            theta -= eta * (g + l1 * len(members) * meta.l1_sign(theta))
        return replace(meta, params=NetworkParams(config, theta))

    # paper-literal with random subsets: the direction changes every iteration
    for _ in range(meta.J2):
        direction = np.zeros_like(theta)
        for u in members:
            st = user_states[u]
            snap = st.latest
            idx = _subset(st.n_obs, "subset", cfg.fraction, rng)
            _, g = loss_grad_flat(snap.flat, config, st.X[idx], st.r[idx])
            direction += meta.weight(u) * g + l1 * meta.l1_sign(snap.flat)
        theta -= eta * direction
    return replace(meta, params=NetworkParams(config, theta))


def meta_eval_many(
    meta: MetaState, groups, user_states: Mapping[Hashable, UserState]
) -> list[MetaState]:
    """Full-batch meta-eval updates for several groups from one starting point.

    Every group runs the same J2 steps as ``meta_update_batch``; the groups
    are stacked into padded arrays so all of them advance together.
    """
    member_lists = [_group_members(g, user_states) for g in groups]
    config = meta.params.config
    l1 = meta.lam / math.sqrt(config.width)
    K = len(member_lists)
    sizes = [sum(user_states[u].n_obs for u in ms) for ms in member_lists]
    N = max(sizes)
    X = np.zeros((K, N, config.input_dim))
    r = np.zeros((K, N))
    w = np.zeros((K, N))
    eta = np.full(K, meta.eta2)
    for k, ms in enumerate(member_lists):
        pos = 0
        for u in ms:
            st = user_states[u]
            X[k, pos : pos + st.n_obs] = st.X
            r[k, pos : pos + st.n_obs] = st.r
            w[k, pos : pos + st.n_obs] = meta.weight(u)
            pos += st.n_obs
        if meta.normalize:
            eta[k] /= w[k].sum()
    counts = np.array([len(ms) for ms in member_lists], dtype=np.float64)
    theta = np.tile(meta.start.flat, (K, 1))
    for _ in range(meta.J2):
        _, g = loss_grad_stacked(theta, config, X, r, w)
        if l1:
            g += (l1 * counts)[:, None] * meta.l1_sign(theta)
        theta -= eta[:, None] * g
    return [replace(meta, params=NetworkParams(config, row)) for row in theta]


def sgd_meta_iterates(
    meta: MetaState, group, user_states: Mapping[Hashable, UserState]
) -> list[np.ndarray]:
    """All iterates Theta_(0..N) of the sequential single-datum meta pass."""
    members = sorted(group)
    pooled = [
        (u, i) for u in members for i in range(user_states[u].n_obs)
    ]
    if not pooled:
        raise ValueError("pooled group history is empty")
    config = meta.params.config
    theta = meta.start.flat.copy()
    iterates = [theta.copy()]
    for u, i in pooled:
        st = user_states[u]
        snap = st.latest
        _, g = loss_grad_flat(snap.flat, config, st.X[i : i + 1], st.r[i : i + 1])
        theta = theta - meta.eta2 * g
        iterates.append(theta)
    return iterates


def meta_update_sgd(
    meta: MetaState,
    group,
    user_states: Mapping[Hashable, UserState],
    rng=None,
    return_index: bool = False,
):
    """Sequential pass over the pooled group history, one step per datum.

    Returns a MetaState whose parameters are a uniform draw from
    Theta_(0), ..., Theta_(N-1); with ``return_index`` also the drawn index.
    """
    iterates = sgd_meta_iterates(meta, group, user_states)
    if rng is None:
        rng = np.random.default_rng(0)
    n = len(iterates) - 1
    j = int(rng.integers(n))
    out = replace(meta, params=NetworkParams(meta.params.config, iterates[j]))
    return (out, j) if return_index else out
