"""Relative-group inference from per-user reward predictions on one arm."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np


@dataclass(frozen=True)
class GroupConfig:
    nu: float = 5.0
    gamma: float = 0.4

    def __post_init__(self):
        if not self.nu > 1.0:
            raise ValueError(f"nu must be > 1, got {self.nu}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def threshold(self) -> float:
        return (self.nu - 1.0) / self.nu * self.gamma


@dataclass(frozen=True)
class GroupAssignment:
    user: Hashable
    arm: int
    members: frozenset

    def __post_init__(self):
        if self.user not in self.members:
            raise ValueError("serving user must belong to its own group")

    def __len__(self):
        return len(self.members)


def infer_group(
    predictions: Mapping[Hashable, float], user, cfg: GroupConfig, arm: int = 0
) -> GroupAssignment:
    """Users whose prediction lies within the threshold of the serving user's."""
    if user not in predictions:
        raise ValueError(f"serving user {user!r} has no prediction")
    ref = predictions[user]
    tau = cfg.threshold
    members = frozenset(u for u, p in predictions.items() if abs(p - ref) <= tau)
    return GroupAssignment(user, arm, members)


def infer_groups_matrix(preds: np.ndarray, user_index: int, tau: float) -> np.ndarray:
    """Vectorised form for dense user indices.

    ``preds`` has shape (n_users, k); returns a boolean (k, n_users) mask of
    group membership per arm.
    """
    return (np.abs(preds - preds[user_index]) <= tau).T


def group_accuracy(inferred: GroupAssignment, truth) -> tuple[float, float]:
    """(exact match, Jaccard similarity) between inferred members and ``truth``."""
    truth = frozenset(truth)
    got = inferred.members
    exact = 1.0 if got == truth else 0.0
    union = got | truth
    jaccard = len(got & truth) / len(union) if union else 1.0
    return exact, jaccard
