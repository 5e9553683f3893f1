"""Learners for cascading bandits, all driven through ``recommend``/``update``.

* :class:`MUCBV` -- variance-aware cascade UCB on calibrated mean-of-medians
  estimates, with a forced-exploration warm-up sized by an assumed
  corruption budget.
* :class:`CascadeUCBV` -- the same index on plain empirical means, no warm-up.
* :class:`CascadeCBARBAR` -- epoch-based elimination with gap estimates and
  randomized list sampling.

``log`` is the natural logarithm throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from robust_cascade.core import CascadeFeedback, RankedList, expected_reward, top_d
from robust_cascade.estimators import (
    CalibrationParams,
    SampleLog,
    mean_of_medians_from_counts,
)


class FeedbackMismatch(RuntimeError):
    """Feedback does not belong to the list this policy recommended."""


@dataclass(frozen=True)
class PolicyConfig:
    A: float = 2.0
    B: float = 3.0
    C_assumed: int = 0
    delta: float = 0.05
    estimator: CalibrationParams = field(default_factory=CalibrationParams)
    # Replaces the CBARBAR schedule constant when set; the default constant
    # makes the first epoch longer than any desk-scale horizon.
    cbarbar_lambda: float | None = None

    def __post_init__(self) -> None:
        if self.A <= 0 or self.B <= 0:
            raise ValueError("radius constants A and B must be positive")
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")
        if self.C_assumed < 0:
            raise ValueError("assumed corruption budget must be non-negative")
        if self.cbarbar_lambda is not None and self.cbarbar_lambda <= 0:
            raise ValueError("cbarbar_lambda must be positive")


def ucb_indices(mu_hat: np.ndarray, counts: np.ndarray, t: int, A: float, B: float) -> np.ndarray:
    """Variance-aware upper confidence indices, capped at 1."""
    s = np.maximum(1, counts)
    log_t = math.log(t) if t > 1 else 0.0
    v = mu_hat * (1 - mu_hat)
    rho = A * np.sqrt(v * log_t / s) + B * log_t / s
    return np.minimum(mu_hat + rho, 1.0)


class _IndexPolicy:
    """Shared machinery for the two UCB-style learners."""

    name = "index"

    def __init__(
        self,
        n_items: int,
        d: int,
        config: PolicyConfig,
        rng: np.random.Generator | None = None,
        logs: list[SampleLog] | None = None,
    ) -> None:
        if not (1 <= d <= n_items):
            raise ValueError("need 1 <= d <= K")
        self.n_items = n_items
        self.d = d
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.estimator.partition_seed)
        self.logs = logs if logs is not None else [SampleLog() for _ in range(n_items)]
        if len(self.logs) != n_items:
            raise ValueError("one log per item required")
        self._pending: RankedList | None = None
        self.last_indices: np.ndarray | None = None

    def counts(self) -> np.ndarray:
        return np.fromiter((len(log) for log in self.logs), dtype=np.int64, count=self.n_items)

    def estimates(self) -> np.ndarray:
        raise NotImplementedError

    def ucb_list(self, round_: int) -> RankedList:
        idx = ucb_indices(self.estimates(), self.counts(), round_, self.config.A, self.config.B)
        self.last_indices = idx
        return RankedList(top_d(idx, self.d))

    def recommend(self, round_: int) -> RankedList:
        ranked = self.ucb_list(round_)
        self._pending = ranked
        return ranked

    def observe(self, feedback: CascadeFeedback) -> None:
        """Append the examined prefix to the item logs."""
        for k, bit in zip(feedback.observed_items, feedback.clicks):
            self.logs[k].append(bit)

    def update(self, feedback: CascadeFeedback) -> None:
        if self._pending is not None and feedback.ranked != self._pending:
            raise FeedbackMismatch(f"feedback for {feedback.ranked.items}, recommended {self._pending.items}")
        self._pending = None
        self.observe(feedback)


class CascadeUCBV(_IndexPolicy):
    """Variance-aware cascade UCB on empirical means."""

    name = "cascade_ucbv"

    def estimates(self) -> np.ndarray:
        ones = np.fromiter((log.ones for log in self.logs), dtype=float, count=self.n_items)
        return ones / np.maximum(1, self.counts())


class MUCBV(_IndexPolicy):
    """Calibrated mean-of-medians cascade UCB with a corruption warm-up.

    The warm-up runs ``10 * C_assumed`` rounds per item, item ``k`` at the
    top of the list (so it is always examined) and the ``d - 1`` least
    observed other items below it. Warm-up progress counts this
    instance's own recommendations, so a wrapper that lets it act only
    occasionally does not stall.
    """

    name = "mucbv"

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.warmup_done = 0
        self.calls = 0
        self._cache_len = np.full(self.n_items, -1, dtype=np.int64)
        self._cache_val = np.zeros(self.n_items)

    @property
    def warmup_length(self) -> int:
        return 10 * self.n_items * self.config.C_assumed

    @property
    def in_warmup(self) -> bool:
        return self.warmup_done < self.warmup_length

    def warmup_list(self) -> RankedList:
        k = self.warmup_done // (10 * self.config.C_assumed)
        counts = self.counts().astype(float)
        counts[k] = np.inf
        rest = np.lexsort((np.arange(self.n_items), counts))[: self.d - 1]
        return RankedList((k, *(int(i) for i in rest)))

    def estimates(self) -> np.ndarray:
        """Calibrated estimates, recomputed only for items whose log grew.

        Each recomputation draws a fresh random partition from ``self.rng``.
        """
        params = self.config.estimator
        for k, log in enumerate(self.logs):
            s = len(log)
            if s != self._cache_len[k]:
                self._cache_val[k] = mean_of_medians_from_counts(s, log.ones, params, self.rng).value
                self._cache_len[k] = s
                self.calls += 1
        return self._cache_val.copy()

    def recommend(self, round_: int) -> RankedList:
        if self.in_warmup:
            ranked = self.warmup_list()
            self.warmup_done += 1
        else:
            ranked = self.ucb_list(round_)
        self._pending = ranked
        return ranked


def list_with(k: int, scores: np.ndarray, d: int) -> RankedList:
    """Item ``k`` on top, then the ``d - 1`` best-scoring other items."""
    others = np.asarray(scores, dtype=float).copy()
    others[k] = -np.inf
    return RankedList((k, *top_d(others, d - 1)))


def plugin_rewards(mu_hat: np.ndarray, d: int):
    """Best list overall and best list containing each item, under ``mu_hat``.

    With the cascade reward monotone in every mean, the best list is the
    top ``d`` and the best list through item ``k`` is ``k`` plus the top
    ``d - 1`` of the rest.

    Returns:
        ``(best_items, best_reward, item_lists, item_rewards)``.
    """
    best = top_d(mu_hat, d)
    r_best = expected_reward(best, mu_hat)
    lists = [list_with(k, mu_hat, d) for k in range(len(mu_hat))]
    r_item = np.array([expected_reward(lst, mu_hat) for lst in lists])
    return best, r_best, lists, r_item


@dataclass
class CbarbarEpoch:
    m: int
    n_item: np.ndarray
    n_best: int
    length: int
    probs: np.ndarray


class CascadeCBARBAR:
    """Epoch-based robust elimination adapted to the cascade reward.

    Each epoch samples, per round, either item ``k``'s designated list
    ``S_k`` or the estimated best list ``S_*``, with probabilities fixed
    by the current gap estimates. Item ``k`` heads its own list, so every
    draw of ``S_k`` observes ``k``. Estimates and lists are refreshed only
    when the epoch's ``N^m`` rounds are used up.
    """

    name = "cbarbar"

    def __init__(
        self,
        n_items: int,
        d: int,
        horizon: int,
        config: PolicyConfig,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.n_items = K = n_items
        self.d = d
        self.horizon = horizon
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng()
        if config.cbarbar_lambda is not None:
            self.lam = float(config.cbarbar_lambda)
        else:
            self.lam = 1024 * math.log((8 * K / config.delta) * math.log(horizon) ** 2) ** 2
        self.gaps = np.ones(K)
        self.item_lists = [self._list_with(k, np.zeros(K)) for k in range(K)]
        self.best_list = RankedList(tuple(range(d)))
        self.mu_hat = np.zeros(K)
        self.low_confidence = np.ones(K, dtype=bool)
        self.history: list[dict] = []
        self.epoch: CbarbarEpoch | None = None
        self.m = 0
        self._pending: int | None = None
        self.epoch_init()

    def _list_with(self, k: int, scores: np.ndarray) -> RankedList:
        return list_with(k, scores, self.d)

    def epoch_init(self) -> CbarbarEpoch:
        self.m += 1
        m, d, K = self.m, self.d, self.n_items
        n_best = math.ceil(self.lam * d * d * K * 2 ** ((m - 1) / 2))
        n_item = np.ceil(self.lam * (self.gaps / d) ** -2).astype(np.int64)
        length = int(n_item.sum()) + n_best
        probs = np.append(n_item, n_best) / length
        self.epoch = CbarbarEpoch(m, n_item, n_best, length, probs)
        self._cdf = np.cumsum(probs)
        self._cdf[-1] = 1.0
        self._rounds = 0
        self._sums = np.zeros(K)
        self._pulls = np.zeros(K, dtype=np.int64)
        self._lists_by_key = {}
        for k, lst in enumerate(self.item_lists):
            self._lists_by_key.setdefault(lst.items, []).append(k)
        return self.epoch

    def candidates(self) -> list[RankedList]:
        return [*self.item_lists, self.best_list]

    def recommend(self, round_: int | None = None) -> RankedList:
        j = int(np.searchsorted(self._cdf, self.rng.random(), side="right"))
        j = min(j, self.n_items)
        self._pending = j
        return self.candidates()[j]

    def update(self, feedback: CascadeFeedback) -> None:
        if self._pending is None or feedback.ranked != self.candidates()[self._pending]:
            raise FeedbackMismatch("feedback does not match the sampled list")
        self._pending = None
        owners = self._lists_by_key.get(feedback.ranked.items, ())
        seen = feedback.observed
        for k in owners:
            if k in seen:
                self._sums[k] += seen[k]
                self._pulls[k] += 1
        self._rounds += 1
        if self._rounds >= self.epoch.length:
            self.epoch_close()

    def epoch_close(self) -> None:
        """Refresh estimates, candidate lists and gap estimates; open the next epoch.

        Items whose designated list was never drawn keep last epoch's
        estimate.
        """
        m = self.m
        pulled = self._pulls > 0
        self.mu_hat = np.where(pulled, self._sums / np.maximum(1, self._pulls), self.mu_hat)
        self.low_confidence &= ~pulled
        best, r_best, new_lists, r_item = plugin_rewards(self.mu_hat, self.d)
        old = self.gaps
        self.gaps = np.maximum.reduce([np.full(self.n_items, 2.0 ** (-m / 4)), r_best - r_item, old / 2])
        self.history.append(
            {
                "epoch": m,
                "length": self.epoch.length,
                "rounds": self._rounds,
                "gaps_before": old.copy(),
                "gaps_after": self.gaps.copy(),
            }
        )
        self.item_lists = new_lists
        self.best_list = RankedList(best)
        self.epoch_init()
