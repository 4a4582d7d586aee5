"""Synthetic users with static latent groups and a certified reward gap.

Every user in latent group g shares the expected reward h_g(x). On a given
arm, latent groups with equal h_g form one relative group; distinct
relative groups are rejection-sampled to differ by at least ``gap``.
With ``quantize > 0`` expected rewards are rounded to multiples of that
step, so latent groups can tie and relative groups vary from arm to arm.

Arms are uniform on the unit sphere unless ``arm_spread`` is set, in which
case they are normalized draws of W^T c + arm_spread * xi with standard
normal c (one coefficient per group) and xi (one per coordinate); this
keeps arms near the span of the group vectors, where rewards vary.
``margin`` further admits only arms whose unrounded rewards all lie within
``margin`` of their rounded level, so no group sits on a rounding boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .base import ArmSet, Round, normalize_rows

FAMILIES = ("linear", "quadratic", "cosine")
TIE_TOL = 1e-9
MAX_BATCHES = 2000


@dataclass(frozen=True)
class SyntheticSpec:
    n_users: int = 20
    n_groups: int = 4
    family: str = "quadratic"
    d: int = 10
    k: int = 10
    noise: float = 0.0
    gap: float = 0.0
    quantize: float = 0.0
    max_cos: float = 0.5
    arm_spread: float | None = None
    margin: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown reward family {self.family!r}")
        if not 1 <= self.n_groups <= self.n_users:
            raise ValueError("need 1 <= n_groups <= n_users")
        if self.d < 1 or self.k < 1:
            raise ValueError("d and k must be >= 1")
        if self.noise < 0 or not 0 <= self.gap <= 1 or not 0 <= self.quantize <= 1:
            raise ValueError("noise, gap and quantize must be nonnegative and gap, quantize <= 1")
        if not 0 < self.max_cos <= 1:
            raise ValueError("max_cos must lie in (0, 1]")
        if self.arm_spread is not None and self.arm_spread < 0:
            raise ValueError("arm_spread must be nonnegative")
        if self.margin is not None and (self.quantize == 0 or not 0 <= self.margin < self.quantize / 2):
            raise ValueError("margin needs quantize > 0 and 0 <= margin < quantize / 2")
        if self.quantize == 0 and (self.n_groups - 1) * self.gap > 1:
            raise ValueError(
                f"{self.n_groups} continuous-valued groups cannot be pairwise {self.gap} apart "
                "inside [0, 1]; set quantize so groups may tie"
            )


def raw_rewards(family: str, X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Unrounded h_g(x) for every arm row of X and group row of W."""
    s = X @ W.T
    if family == "linear":
        h = (s + 1.0) / 2.0
    elif family == "quadratic":
        h = s * s
    elif family == "cosine":
        h = (np.cos(3.0 * s) + 1.0) / 2.0
    else:
        raise ValueError(f"unknown reward family {family!r}")
    return h


def quantized(h: np.ndarray, quantize: float) -> np.ndarray:
    if quantize > 0:
        h = quantize * np.round(h / quantize)
    return np.clip(h, 0.0, 1.0)


def expected_rewards(family: str, X: np.ndarray, W: np.ndarray, quantize: float = 0.0) -> np.ndarray:
    """h_g(x) for every arm row of X and group row of W, shape (n_arms, n_groups)."""
    return quantized(raw_rewards(family, X, W), quantize)


def gap_ok(H: np.ndarray, gap: float) -> np.ndarray:
    """Rows of H whose distinct values (ties within TIE_TOL) are >= gap apart."""
    if H.shape[1] < 2 or gap <= 0:
        return np.ones(H.shape[0], dtype=bool)
    diffs = np.diff(np.sort(H, axis=1), axis=1)
    return np.all((diffs <= TIE_TOL) | (diffs >= gap - 1e-12), axis=1)


def truncated_noise(h: np.ndarray, sigma: float, u: np.ndarray) -> np.ndarray:
    """Gaussian(0, sigma^2) noise conditioned on h + noise in [0, 1], by inverse CDF of ``u``."""
    if sigma == 0:
        return np.zeros_like(h)
    lo = ndtr((0.0 - h) / sigma)
    hi = ndtr((1.0 - h) / sigma)
    p = np.clip(lo + u * (hi - lo), 1e-300, 1 - 1e-16)
    z = sigma * ndtri(p)
    return np.clip(h + z, 0.0, 1.0) - h


def sample_group_vectors(n_groups: int, d: int, max_cos: float, rng) -> np.ndarray:
    """Unit vectors with pairwise |cos| <= max_cos, relaxing the bound if it is unreachable."""
    bound = max_cos
    while True:
        for _ in range(1000):
            W = normalize_rows(rng.normal(size=(n_groups, d)))
            C = np.abs(W @ W.T) - np.eye(n_groups)
            if C.max(initial=0.0) <= bound:
                return W
        bound = min(1.0, bound + 0.05)


class SyntheticEnv:
    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.noise_rng = np.random.default_rng((spec.seed, 1))
        self.W = sample_group_vectors(spec.n_groups, spec.d, spec.max_cos, self.rng)
        perm = self.rng.permutation(spec.n_users)
        self.group_of = np.empty(spec.n_users, dtype=int)
        self.group_of[perm] = np.arange(spec.n_users) % spec.n_groups
        self.users = list(range(spec.n_users))
        self.members = [np.flatnonzero(self.group_of == g) for g in range(spec.n_groups)]
        self.dim = spec.d
        self.k = spec.k

    def _draw(self, n: int) -> np.ndarray:
        spec = self.spec
        if spec.arm_spread is None:
            return normalize_rows(self.rng.normal(size=(n, spec.d)))
        c = self.rng.normal(size=(n, spec.n_groups))
        xi = self.rng.normal(size=(n, spec.d))
        return normalize_rows(c @ self.W + spec.arm_spread * xi)

    def sample_arms(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """n unit arms passing the gap check, with their group reward table."""
        spec = self.spec
        got_X, got_H, have = [], [], 0
        batch = max(64, 4 * n)
        for _ in range(MAX_BATCHES):
            X = self._draw(batch)
            raw = raw_rewards(spec.family, X, self.W)
            H = quantized(raw, spec.quantize)
            ok = gap_ok(H, spec.gap)
            if spec.margin is not None:
                ok &= np.all(np.abs(raw - H) <= spec.margin, axis=1)
            if ok.any():
                got_X.append(X[ok])
                got_H.append(H[ok])
                have += int(ok.sum())
                if have >= n:
                    return np.vstack(got_X)[:n], np.vstack(got_H)[:n]
        raise RuntimeError(
            f"gap {spec.gap} too rarely satisfied for family {spec.family!r}; "
            "lower the gap or enable quantize"
        )

    def _round_for(self, t: int, user: int) -> Round:
        spec = self.spec
        X, H = self.sample_arms(spec.k)
        g = self.group_of[user]
        h = H[:, g]
        u = self.noise_rng.random(spec.k)
        realized = h + truncated_noise(h, spec.noise, u)
        truth = []
        for i in range(spec.k):
            same = np.flatnonzero(np.abs(H[i] - h[i]) <= TIE_TOL)
            truth.append(frozenset(int(v) for v in np.flatnonzero(np.isin(self.group_of, same))))
        return Round(ArmSet(t, user, X), h, realized, truth)

    def warm_start(self):
        out = []
        for u in self.users:
            rnd = self._round_for(0, u)
            i = int(self.rng.integers(self.spec.k))
            out.append((u, rnd.arm_set.arms[i], float(rnd.realized[i])))
        return out

    def step(self, t: int) -> Round:
        g = int(self.rng.integers(self.spec.n_groups))
        members = self.members[g]
        user = int(members[self.rng.integers(members.size)])
        return self._round_for(t, user)


def synthetic_step(spec: SyntheticSpec, t: int, rng) -> tuple[ArmSet, Round]:
    """One-off round from a fresh environment driven by ``rng``."""
    env = SyntheticEnv(spec)
    env.rng = rng
    rnd = env.step(t)
    return rnd.arm_set, rnd
