"""Corruption-agnostic wrapper over a grid of MUCB-V learners (M2UCB-V).

One MUCB-V instance per assumed budget in ``{0, 1, 2, 4, ...}``. Each
round a surviving instance is drawn uniformly to act; every instance
shares the same item logs, so all of them learn from every observation.
Every ``window`` rounds, instances whose realized reward is confidently
below the leader's are dropped:

    eliminate i  if  mean_i + w_i < max_j (mean_j - w_j),  w = sqrt(2 log T / n)

Only rounds where an instance acted count towards its reward statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from robust_cascade.core import CascadeFeedback, RankedList
from robust_cascade.estimators import SampleLog
from robust_cascade.policies import MUCBV, FeedbackMismatch, PolicyConfig


def geometric_grid(horizon: int, max_exp: int | None = None) -> tuple[int, ...]:
    if max_exp is None:
        max_exp = math.ceil(math.log2(horizon)) if horizon > 1 else 0
    return (0, *(2**i for i in range(max_exp + 1)))


@dataclass
class InstanceStats:
    instance_id: int
    budget: int
    acted: int = 0
    reward: float = 0.0
    alive: bool = True

    @property
    def mean_reward(self) -> float:
        return self.reward / self.acted if self.acted else 0.0


class M2UCBV:
    name = "m2ucbv"

    def __init__(
        self,
        n_items: int,
        d: int,
        horizon: int,
        config: PolicyConfig,
        rng: np.random.Generator | None = None,
        *,
        grid: tuple[int, ...] | None = None,
        window: int | None = None,
        n_min: int | None = None,
    ) -> None:
        self.n_items = n_items
        self.d = d
        self.horizon = horizon
        self.rng = rng if rng is not None else np.random.default_rng()
        self.grid = tuple(grid) if grid is not None else geometric_grid(horizon)
        if list(self.grid) != sorted(set(self.grid)) or self.grid[0] != 0:
            raise ValueError("grid must be strictly increasing and start at 0")
        log_t = math.log(max(horizon, 2))
        self.window = window if window is not None else math.ceil(n_items * log_t)
        self.n_min = n_min if n_min is not None else math.ceil(4 * log_t)
        self.width_log = log_t
        self.logs = [SampleLog() for _ in range(n_items)]
        children = self.rng.spawn(len(self.grid))
        self.instances = [
            MUCBV(n_items, d, replace(config, C_assumed=c), rng=child, logs=self.logs)
            for c, child in zip(self.grid, children)
        ]
        self.stats = [InstanceStats(i, c) for i, c in enumerate(self.grid)]
        self.acting_log: list[int] = []
        self._acting: int | None = None

    def alive(self) -> list[int]:
        return [s.instance_id for s in self.stats if s.alive]

    def draw_instance(self) -> int:
        alive = self.alive()
        return alive[int(self.rng.integers(len(alive)))]

    def recommend(self, round_: int) -> RankedList:
        i = self.draw_instance()
        self._acting = i
        self.acting_log.append(i)
        return self.instances[i].recommend(round_)

    def update(self, feedback: CascadeFeedback, round_: int | None = None) -> None:
        """Acting instance learns and is credited; the shared logs carry the bits to the rest."""
        if self._acting is None:
            raise FeedbackMismatch("update without a pending recommendation")
        i, self._acting = self._acting, None
        self.instances[i].update(feedback)
        st = self.stats[i]
        st.acted += 1
        st.reward += 1.0 if feedback.clicked else 0.0
        if round_ is not None and round_ % self.window == 0:
            self.eliminate()

    def width(self, n: int) -> float:
        return math.sqrt(2 * self.width_log / n)

    def eliminate(self) -> list[int]:
        """Drop instances confidently worse than the leader; returns dropped ids."""
        eligible = [s for s in self.stats if s.alive and s.acted >= self.n_min]
        if len(eligible) < 2:
            return []
        floor = max(s.mean_reward - self.width(s.acted) for s in eligible)
        dropped = []
        for s in eligible:
            if s.mean_reward + self.width(s.acted) < floor and len(self.alive()) > 1:
                s.alive = False
                dropped.append(s.instance_id)
        return dropped

    def surviving_budgets(self) -> list[int]:
        return [s.budget for s in self.stats if s.alive]
