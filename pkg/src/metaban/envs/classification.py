"""Classification data turned into a bandit problem.

An input vector x in R^d becomes k arms in R^(d+k-1); arm i carries x at
offset i and zeros elsewhere, and only the arm matching the label pays 1.
Every class is a user; when several files are given, each file is a group
of users.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .base import ArmSet, Round, normalize_rows

log = logging.getLogger(__name__)


def classification_arms(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise ValueError("input vector must have unit norm")
    if k < 1:
        raise ValueError("k must be >= 1")
    d = x.size
    arms = np.zeros((k, d + k - 1))
    for i in range(k):
        arms[i, i : i + d] = x
    return arms


def load_labeled_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``label,p1,...,pd`` rows; features are normalized to unit norm."""
    labels, rows = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip() != "label":
            raise ValueError(f"{path}: expected a header starting with 'label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    X = np.asarray(rows, dtype=np.float64)
    keep = np.linalg.norm(X, axis=1) > 0
    if not np.all(keep):
        log.warning("%s: dropping %d all-zero rows", path, int((~keep).sum()))
    return normalize_rows(X[keep]), np.asarray(labels)[keep]


class ClassificationEnv:
    """Bandit over one or more labeled datasets.

    Each round picks a dataset uniformly, then a class (user) uniformly,
    then a sample of that class; reward is 1 iff the chosen arm index equals
    the label.
    """

    def __init__(self, datasets, n_classes: int | None = None, seed: int = 0):
        self.datasets = [(np.asarray(X), np.asarray(y)) for X, y in datasets]
        if not self.datasets:
            raise ValueError("no datasets")
        dims = {X.shape[1] for X, _ in self.datasets}
        if len(dims) != 1:
            raise ValueError("all datasets must share a feature dimension")
        labels = np.concatenate([y for _, y in self.datasets])
        self.k = int(n_classes if n_classes is not None else labels.max() + 1)
        if labels.min() < 0 or labels.max() >= self.k:
            raise ValueError("labels must lie in [0, n_classes)")
        self.dim = dims.pop() + self.k - 1
        self.rng = np.random.default_rng(seed)
        self.by_user = {}
        for g, (X, y) in enumerate(self.datasets):
            for c in np.unique(y):
                self.by_user[(g, int(c))] = np.flatnonzero(y == c)
        self.users = sorted(self.by_user)

    @classmethod
    def from_csv(cls, paths, n_classes=None, seed=0) -> "ClassificationEnv":
        if isinstance(paths, (str, Path)):
            paths = [paths]
        return cls([load_labeled_csv(p) for p in paths], n_classes, seed)

    def _round_for(self, t: int, user) -> Round:
        g, c = user
        X, _ = self.datasets[g]
        x = X[self.rng.choice(self.by_user[user])]
        arms = classification_arms(x, self.k)
        expected = (np.arange(self.k) == c).astype(np.float64)
        return Round(ArmSet(t, user, arms), expected, expected)

    def warm_start(self):
        out = []
        for u in self.users:
            rnd = self._round_for(0, u)
            i = int(self.rng.integers(self.k))
            out.append((u, rnd.arm_set.arms[i], float(rnd.realized[i])))
        return out

    def step(self, t: int) -> Round:
        g = int(self.rng.integers(len(self.datasets)))
        group_users = [u for u in self.users if u[0] == g]
        user = group_users[int(self.rng.integers(len(group_users)))]
        return self._round_for(t, user)
