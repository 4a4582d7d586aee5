"""Rating-matrix environment.

Ratings ``user_id,item_id,rating`` are restricted to the most active users
and items, factorized by a truncated SVD, and item features are taken as
the right singular vectors scaled by the singular values, normalized per
item. A rating below ``threshold`` pays reward 1. Each round serves one
user with one rewarding item and k-1 non-rewarding items that user rated.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2

from .base import ArmSet, Round, normalize_rows

log = logging.getLogger(__name__)


def power_svd(A, rank: int, tol: float = 1e-8, max_iter: int = 500, seed: int = 0):
    """Top-``rank`` singular triplets by power iteration with deflation.

    Returns (U, s, Vt) shaped like ``numpy.linalg.svd(..., full_matrices=False)``
    truncated to ``rank``. Signs are fixed so the largest-magnitude entry of
    each right singular vector is positive.
    """
    A = np.array(A, dtype=np.float64)
    n, p = A.shape
    if not 1 <= rank <= min(n, p):
        raise ValueError(f"rank must lie in [1, {min(n, p)}]")
    rng = np.random.default_rng(seed)
    R = A.copy()
    U = np.zeros((n, rank))
    V = np.zeros((p, rank))
    s = np.zeros(rank)
    for j in range(rank):
        v = rng.normal(size=p)
        v /= np.linalg.norm(v)
        for _ in range(max_iter):
            w = R.T @ (R @ v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            w /= nw
            done = np.linalg.norm(w - v) < tol
            v = w
            if done:
                break
        u = R @ v
        sigma = np.linalg.norm(u)
        u = u / sigma if sigma > 0 else u
        k = np.argmax(np.abs(v))
        if v[k] < 0:
            u, v = -u, -v
        U[:, j], V[:, j], s[j] = u, v, sigma
        R -= sigma * np.outer(u, v)
    return U, s, V.T


def read_ratings(path) -> list[tuple[str, str, float]]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["user_id", "item_id", "rating"]:
            raise ValueError(f"{path}: expected header user_id,item_id,rating")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                out.append((row[0].strip(), row[1].strip(), float(row[2])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: rating {row[2]!r} is not a number") from None
    return out


def read_features(path) -> dict[str, np.ndarray]:
    feats = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip() != "item_id":
            raise ValueError(f"{path}: expected a header starting with item_id")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                feats[row[0].strip()] = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return feats


def write_features(path, items, features) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id"] + [f"f{j + 1}" for j in range(features.shape[1])])
        for item, f in zip(items, features):
            w.writerow([item] + [repr(float(v)) for v in f])


@dataclass(frozen=True)
class RatingSpec:
    path: str
    top_users: int = 2000
    top_items: int = 10000
    d: int = 10
    threshold: float = 2.0
    k: int = 10
    n_groups: int = 0
    features_path: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.k < 2:
            raise ValueError("need d >= 1 and k >= 2")
        if self.d > min(self.top_users, self.top_items):
            raise ValueError("d must not exceed min(top_users, top_items)")


class RatingEnv:
    def __init__(self, spec: RatingSpec, items, item_features, user_items, user_features=None):
        self.spec = spec
        self.items = list(items)
        self.features = normalize_rows(item_features)
        self.dim = self.features.shape[1]
        self.k = spec.k
        self.rng = np.random.default_rng(spec.seed)
        # user -> (indices of rewarding items, indices of non-rewarding items)
        self.pools = {}
        for u, (pos, neg) in user_items.items():
            if not pos:
                log.warning("skipping user %s: no rewarding item", u)
                continue
            if len(neg) < spec.k - 1:
                log.warning("skipping user %s: fewer than %d non-rewarding items", u, spec.k - 1)
                continue
            self.pools[u] = (np.array(pos), np.array(neg))
        if not self.pools:
            raise ValueError("no user has a usable arm pool")
        self.users = sorted(self.pools)
        self.groups = [self.users]
        if spec.n_groups > 1 and user_features is not None:
            F = np.stack([user_features[u] for u in self.users])
            _, labels = kmeans2(F, spec.n_groups, seed=spec.seed, minit="++")
            self.groups = [
                [u for u, l in zip(self.users, labels) if l == g] for g in np.unique(labels)
            ]

    def _round_for(self, t: int, user) -> Round:
        pos, neg = self.pools[user]
        i_pos = pos[self.rng.integers(pos.size)]
        i_neg = self.rng.choice(neg, size=self.k - 1, replace=False)
        order = self.rng.permutation(self.k)
        idx = np.concatenate([[i_pos], i_neg])[order]
        rewards = (order == 0).astype(np.float64)
        return Round(ArmSet(t, user, self.features[idx]), rewards, rewards)

    def warm_start(self):
        out = []
        for u in self.users:
            rnd = self._round_for(0, u)
            i = int(self.rng.integers(self.k))
            out.append((u, rnd.arm_set.arms[i], float(rnd.realized[i])))
        return out

    def step(self, t: int) -> Round:
        group = self.groups[int(self.rng.integers(len(self.groups)))]
        user = group[int(self.rng.integers(len(group)))]
        return self._round_for(t, user)


def ingest_ratings(spec: RatingSpec) -> RatingEnv:
    rows = read_ratings(spec.path)
    user_counts = Counter(u for u, _, _ in rows)
    item_counts = Counter(i for _, i, _ in rows)
    top_u = sorted(user_counts, key=lambda u: (-user_counts[u], u))[: spec.top_users]
    top_i = sorted(item_counts, key=lambda i: (-item_counts[i], i))[: spec.top_items]
    u_index = {u: j for j, u in enumerate(top_u)}
    i_index = {i: j for j, i in enumerate(top_i)}
    M = np.zeros((len(top_u), len(top_i)))
    for u, i, r in rows:
        if u in u_index and i in i_index:
            M[u_index[u], i_index[i]] = r
    user_features = None
    if spec.features_path:
        feats = read_features(spec.features_path)
        missing = [i for i in top_i if i not in feats]
        if missing:
            log.warning("dropping %d items without features", len(missing))
        top_i = [i for i in top_i if i in feats]
        i_index = {i: j for j, i in enumerate(top_i)}
        item_features = np.stack([feats[i] for i in top_i])
    else:
        if spec.d > min(M.shape):
            raise ValueError(f"d={spec.d} exceeds the rating matrix rank bound {min(M.shape)}")
        U, s, Vt = power_svd(M, spec.d, seed=spec.seed)
        item_features = (Vt.T * s)
        user_features = dict(zip(top_u, U * s))
    nonzero = np.linalg.norm(item_features, axis=1) > 0
    user_items = {u: ([], []) for u in top_u}
    for u, i, r in rows:
        j = i_index.get(i)
        if u in u_index and j is not None and nonzero[j]:
            user_items[u][0 if r < spec.threshold else 1].append(j)
    for u in user_items:
        pos, neg = user_items[u]
        user_items[u] = (sorted(set(pos)), sorted(set(neg) - set(pos)))
    return RatingEnv(spec, top_i, np.where(nonzero[:, None], item_features, 1.0), user_items, user_features)
