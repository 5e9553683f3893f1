"""Cascade-click environment: item parameters, lists, feedback, reward, regret.

Items are 0-indexed. Positions and the stopping position ``kappa`` are
1-indexed, so ``kappa == d + 1`` means the user examined the whole list
without clicking.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidListError(ValueError):
    """A ranked list is malformed for the environment it is used with."""


@dataclass(frozen=True)
class EnvironmentSpec:
    """Ground-truth click probabilities, list size and horizon."""

    mu: tuple[float, ...]
    d: int
    horizon: int

    def __post_init__(self) -> None:
        mu = tuple(float(m) for m in self.mu)
        object.__setattr__(self, "mu", mu)
        if not mu:
            raise ValueError("need at least one item")
        if any(not (0.0 <= m <= 1.0) for m in mu):
            raise ValueError("click probabilities must lie in [0, 1]")
        if not (1 <= self.d <= len(mu)):
            raise ValueError(f"list size d={self.d} must satisfy 1 <= d <= K={len(mu)}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    @property
    def n_items(self) -> int:
        return len(self.mu)

    @property
    def mu_array(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=float)


@dataclass(frozen=True)
class RankedList:
    """An ordered list of distinct item indices, top position first."""

    items: tuple[int, ...]

    def __post_init__(self) -> None:
        items = tuple(int(i) for i in self.items)
        object.__setattr__(self, "items", items)
        if len(set(items)) != len(items):
            raise InvalidListError(f"duplicate items in list {items}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def validate(self, n_items: int, d: int | None = None) -> None:
        if d is not None and len(self.items) != d:
            raise InvalidListError(f"list {self.items} has length {len(self.items)}, expected {d}")
        for i in self.items:
            if not (0 <= i < n_items):
                raise InvalidListError(f"item {i} out of range for K={n_items}")


@dataclass(frozen=True)
class CascadeFeedback:
    """One round of cascade feedback.

    ``clicks`` holds the observed bits for positions ``1..min(kappa, d)``.
    ``latent`` is the full realized click vector for the list; it exists
    so an adversary can flip bits and re-derive a consistent cascade, and
    policies must never read it.
    """

    ranked: RankedList
    stop_position: int
    clicks: tuple[int, ...]
    latent: tuple[int, ...] = field(repr=False, default=())

    def __post_init__(self) -> None:
        d = len(self.ranked)
        kappa = self.stop_position
        if not (1 <= kappa <= d + 1):
            raise ValueError(f"stop position {kappa} outside [1, {d + 1}]")
        if len(self.clicks) != min(kappa, d):
            raise ValueError("observed bits must cover exactly the examined prefix")
        if any(self.clicks[:kappa - 1]):
            raise ValueError("a click before the stopping position")
        if kappa <= d and self.clicks[kappa - 1] != 1:
            raise ValueError("no click at the stopping position")

    @classmethod
    def from_bits(cls, ranked: RankedList, bits: Sequence[int]) -> "CascadeFeedback":
        """Build the cascade trace a user produces on realized bits ``bits``."""
        bits = tuple(int(b) for b in bits)
        d = len(ranked)
        kappa = d + 1
        for pos, b in enumerate(bits, start=1):
            if b:
                kappa = pos
                break
        return cls(ranked, kappa, bits[:min(kappa, d)], bits)

    @property
    def clicked(self) -> bool:
        return self.stop_position <= len(self.ranked)

    @property
    def observed_items(self) -> tuple[int, ...]:
        return self.ranked.items[: len(self.clicks)]

    @property
    def observed(self) -> dict[int, int]:
        return dict(zip(self.observed_items, self.clicks))


def expected_reward(ranked: RankedList | Sequence[int], mu: Sequence[float]) -> float:
    """Probability of at least one click: ``1 - prod(1 - mu_k)`` over the list."""
    items = ranked.items if isinstance(ranked, RankedList) else tuple(ranked)
    n = len(mu)
    miss = 1.0
    for k in items:
        if not (0 <= k < n):
            raise InvalidListError(f"item {k} out of range for K={n}")
        miss *= 1.0 - float(mu[k])
    return 1.0 - miss


def top_d(scores: np.ndarray, d: int) -> tuple[int, ...]:
    """Indices of the ``d`` largest scores, descending, ties to smaller index."""
    scores = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(scores.size), -scores))
    return tuple(int(i) for i in order[:d])


def optimal_list(mu: Sequence[float], d: int) -> RankedList:
    if not (1 <= d <= len(mu)):
        raise ValueError(f"list size d={d} must satisfy 1 <= d <= K={len(mu)}")
    return RankedList(top_d(np.asarray(mu, dtype=float), d))


def brute_force_optimum(mu: Sequence[float], d: int) -> float:
    """Best expected reward over all d-subsets. Exponential; tests only."""
    return max(expected_reward(s, mu) for s in itertools.combinations(range(len(mu)), d))


def sample_feedback(
    env: EnvironmentSpec, ranked: RankedList, rng: np.random.Generator
) -> CascadeFeedback:
    """Draw one cascade interaction.

    Exactly ``d`` uniforms are consumed per call, in position order, so the
    stream position after round ``t`` does not depend on where users
    clicked.
    """
    ranked.validate(env.n_items, env.d)
    u = rng.random(len(ranked))
    mu = env.mu
    bits = [1 if u[i] < mu[k] else 0 for i, k in enumerate(ranked.items)]
    return CascadeFeedback.from_bits(ranked, bits)


def per_round_regret(env: EnvironmentSpec, chosen: RankedList) -> float:
    best = expected_reward(optimal_list(env.mu, env.d), env.mu)
    return max(0.0, best - expected_reward(chosen, env.mu))
