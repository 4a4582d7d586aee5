from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs.base import regret_of


@dataclass
class TraceRow:
    t: int
    arm: int
    reward: float
    regret: float
    cum_regret: float
    group_exact: int | None
    group_size: float | None


def simulate(env, policy, horizon: int) -> list[TraceRow]:
    """Warm-start ``policy`` on ``env`` and play ``horizon`` rounds."""
    for user, x, r in env.warm_start():
        policy.warm_start(user, x, r)
    rows = []
    cum = 0.0
    for t in range(1, horizon + 1):
        rnd = env.step(t)
        arm_set = rnd.arm_set
        decision = policy.choose(arm_set)
        i = decision.chosen
        fb = rnd.pull(i)
        policy.learn(arm_set.user, i, fb.reward)
        reg = regret_of(fb, i)
        if not np.isfinite(reg):
            raise FloatingPointError("non-finite regret")
        cum += reg
        exact = size = None
        if decision.groups is not None:
            size = float(np.mean([len(g) for g in decision.groups]))
            truth = rnd.true_group(i)
            if truth is not None:
                exact = int(decision.groups[i].members == truth)
        rows.append(TraceRow(t, i, fb.reward, reg, cum, exact, size))
    return rows
