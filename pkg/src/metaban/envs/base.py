"""Round protocol shared by all environments.

Each round an environment emits an :class:`ArmSet` for a serving user and
a :class:`Round` handle; pulling an arm on the handle yields the realized
reward together with the noise-free expected rewards needed for regret.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Protocol

import numpy as np

NORM_TOL = 1e-10


def normalize_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return X / norms


@dataclass(frozen=True)
class ArmSet:
    t: int
    user: Hashable
    arms: np.ndarray

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=np.float64))
        if arms.shape[0] < 1:
            raise ValueError("an arm set needs at least one arm")
        norms = np.linalg.norm(arms, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValueError("all arm vectors must have unit norm")
        arms.flags.writeable = False
        object.__setattr__(self, "arms", arms)

    @property
    def k(self) -> int:
        return self.arms.shape[0]


@dataclass(frozen=True)
class Feedback:
    reward: float
    expected: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError(f"reward {self.reward} outside [0, 1]")

    @property
    def best(self) -> float:
        return float(np.max(self.expected))


def regret_of(feedback: Feedback, chosen: int) -> float:
    """Expected-reward regret of playing ``chosen``."""
    if not 0 <= chosen < feedback.expected.size:
        raise ValueError(f"arm index {chosen} out of range")
    return feedback.best - float(feedback.expected[chosen])


class Round:
    """One round's arms plus the reward oracle for them."""

    def __init__(self, arm_set: ArmSet, expected, realized, true_groups=None):
        self.arm_set = arm_set
        self.expected = np.asarray(expected, dtype=np.float64)
        self.realized = np.asarray(realized, dtype=np.float64)
        self._true_groups = true_groups

    def pull(self, i: int) -> Feedback:
        if not 0 <= i < self.arm_set.k:
            raise ValueError(f"arm index {i} out of range")
        return Feedback(float(self.realized[i]), self.expected)

    def true_group(self, i: int) -> frozenset | None:
        """Users sharing the serving user's expected reward on arm ``i``, if known."""
        if self._true_groups is None:
            return None
        return self._true_groups[i]


class Environment(Protocol):
    users: list
    dim: int
    k: int

    def warm_start(self) -> list[tuple[Hashable, np.ndarray, float]]: ...

    def step(self, t: int) -> Round: ...
