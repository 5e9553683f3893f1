"""Oblivious adversaries that flip observed clicks under a round budget.

A corrupted round costs one budget unit no matter how many bits are
flipped, because the budget charges the largest per-item perturbation of
the round and a flip has magnitude one.
"""

from __future__ import annotations

from dataclasses import dataclass

from robust_cascade.core import CascadeFeedback

KINDS = ("none", "flip-early", "flip-window")


@dataclass
class CorruptionBudget:
    total: int
    spent: int = 0

    def __post_init__(self) -> None:
        if self.total < 0:
            raise ValueError("corruption budget must be non-negative")
        if not (0 <= self.spent <= self.total):
            raise ValueError("spent must lie in [0, total]")

    @property
    def remaining(self) -> int:
        return self.total - self.spent


@dataclass(frozen=True)
class AdversaryStrategy:
    """Which rounds the adversary targets.

    ``flip-early`` targets rounds ``1..budget``; ``flip-window`` targets
    rounds ``window_start .. window_start + window_len - 1``. Both stop
    once the budget is gone.
    """

    kind: str = "none"
    window_start: int = 1
    window_len: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown adversary kind {self.kind!r}; expected one of {KINDS}")
        if self.window_start < 1 or self.window_len < 0:
            raise ValueError("window must start at round >= 1 with non-negative length")

    def targets(self, round_: int) -> bool:
        if self.kind == "flip-early":
            return True
        if self.kind == "flip-window":
            return self.window_start <= round_ < self.window_start + self.window_len
        return False


def default_adversary(budget: int) -> AdversaryStrategy:
    if budget < 0:
        raise ValueError("corruption budget must be non-negative")
    return AdversaryStrategy("flip-early") if budget > 0 else AdversaryStrategy("none")


def flip_all(feedback: CascadeFeedback) -> CascadeFeedback:
    """Invert every realized bit and re-derive the cascade the learner sees."""
    latent = feedback.latent or feedback.clicks
    return CascadeFeedback.from_bits(feedback.ranked, [1 - b for b in latent])


def corrupt(
    feedback: CascadeFeedback,
    round_: int,
    budget: CorruptionBudget,
    strategy: AdversaryStrategy,
) -> CascadeFeedback:
    """Apply the adversary to one round, charging ``budget`` in place.

    An exhausted budget degrades to pass-through.
    """
    if budget.spent > budget.total:
        raise ValueError("budget already overspent")
    if budget.remaining <= 0 or not strategy.targets(round_):
        return feedback
    budget.spent += 1
    return flip_all(feedback)
