from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Hashable

import numpy as np

from ..envs.base import ArmSet


@dataclass(frozen=True)
class Decision:
    chosen: int
    exploit: np.ndarray
    ucb: np.ndarray
    total: np.ndarray
    groups: list | None = None
    meta: Any = None


def select_arm(total) -> int:
    """Index of the largest score; ties go to the lowest index."""
    total = np.asarray(total, dtype=np.float64)
    if total.size == 0:
        raise ValueError("empty arm set")
    if not np.all(np.isfinite(total)):
        raise FloatingPointError("non-finite arm score")
    return int(np.argmax(total))


class Policy(ABC):
    """Bandit policy driven round by round by the harness.

    ``choose`` must leave learner state untouched; ``learn`` applies the
    feedback for the decision made in the same round, exactly once.
    """

    name: str = "policy"

    @abstractmethod
    def warm_start(self, user: Hashable, x: np.ndarray, reward: float) -> None: ...

    @abstractmethod
    def choose(self, arm_set: ArmSet) -> Decision: ...

    @abstractmethod
    def learn(self, user: Hashable, arm: int, reward: float) -> None: ...
