"""Per-item mean estimators over binary click logs.

The robust estimator splits an item's log into odd-sized blocks of about
``alpha * log(s)`` samples, takes each block's majority bit, averages the
majorities, and maps that average back through the inverse of the
binomial majority function ``q_b``. A bounded number of flipped samples
cannot move a block majority unless it owns half the block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np
from scipy.special import betainc


class Estimate(NamedTuple):
    value: float
    low_confidence: bool = False


class SampleLog:
    """Append-only log of observed click bits for one item."""

    __slots__ = ("_bits", "ones")

    def __init__(self, bits: Iterable[int] = ()) -> None:
        self._bits = bytearray()
        self.ones = 0
        self.extend(bits)

    def append(self, bit: int) -> None:
        if bit not in (0, 1):
            raise ValueError(f"click bits must be 0 or 1, got {bit!r}")
        self._bits.append(bit)
        self.ones += bit

    def extend(self, bits: Iterable[int]) -> None:
        for b in bits:
            self.append(int(b))

    def __len__(self) -> int:
        return len(self._bits)

    def __iter__(self):
        return iter(self._bits)

    def as_array(self) -> np.ndarray:
        return np.frombuffer(bytes(self._bits), dtype=np.uint8)


@dataclass(frozen=True)
class CalibrationParams:
    alpha: float = 16.0
    eta: float = 1e-6
    max_iters: int = 60
    partition_seed: int = 0

    def __post_init__(self) -> None:
        if not self.alpha > 15:
            raise ValueError("alpha must exceed 15")
        if not (0 < self.eta < 0.5):
            raise ValueError("eta must lie in (0, 0.5)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _check_odd(b: int) -> None:
    if b < 1 or b % 2 == 0:
        raise ValueError(f"block size must be an odd positive integer, got {b}")


def q_b(b: int, p):
    """Probability that ``Bin(b, p)`` has a strict majority of ones.

    Vectorized over ``p``; evaluated as the regularized incomplete beta
    ``I_p((b+1)/2, (b+1)/2)``.
    """
    _check_odd(b)
    half = (b + 1) // 2
    return betainc(half, b - half + 1, p)


@lru_cache(maxsize=1 << 16)
def _bisect(b: int, y: float, eta: float, max_iters: int) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(max_iters):
        mid = (lo + hi) / 2
        v = float(q_b(b, mid))
        if abs(v - y) <= eta:
            return mid
        if v < y:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def calibrate(b: int, y: float, params: CalibrationParams | None = None) -> float:
    """Invert ``q_b`` at ``y`` by bisection on ``[0, 1]``.

    Returns the first midpoint whose image is within ``eta`` of ``y``, or
    the final bracket midpoint after ``max_iters`` halvings. ``q_1`` is
    the identity, so ``b == 1`` returns ``y`` directly.
    """
    params = params or CalibrationParams()
    _check_odd(b)
    if not (0.0 <= y <= 1.0):
        raise ValueError(f"target must lie in [0, 1], got {y}")
    if b == 1:
        return float(y)
    return _bisect(b, float(y), params.eta, params.max_iters)


def block_size(s: int, alpha: float) -> int:
    """Odd block size: ``ceil(alpha * log s)`` rounded up to odd, at least 1."""
    raw = max(1, math.ceil(alpha * math.log(max(s, 2))))
    return raw if raw % 2 else raw + 1


def empirical_mean(log: SampleLog | Iterable[int]) -> Estimate:
    if not isinstance(log, SampleLog):
        log = SampleLog(log)
    if len(log) == 0:
        return Estimate(0.0, True)
    return Estimate(log.ones / len(log))


def variance_proxy(mu_hat):
    return mu_hat * (1 - mu_hat)


def _majority_fraction(ones_per_block: np.ndarray, beta: int) -> tuple[int, int]:
    wins = int(np.count_nonzero(ones_per_block >= (beta + 1) // 2))
    return wins, ones_per_block.size


def mean_of_medians_from_counts(
    s: int,
    ones: int,
    params: CalibrationParams,
    rng: np.random.Generator,
    beta: int | None = None,
) -> Estimate:
    """Calibrated mean-of-medians from a log summarized by ``(s, ones)``.

    A uniform shuffle of a binary log followed by consecutive blocking
    puts a multivariate-hypergeometric number of ones in each block, so
    the block counts are drawn directly instead of permuting ``s`` bits.
    """
    if s == 0:
        return Estimate(0.0, True)
    if beta is None:
        if s < math.ceil(params.alpha * math.log(max(s, 2))):
            return Estimate(ones / s)
        beta = block_size(s, params.alpha)
    m = s // beta
    if m == 0:
        return Estimate(ones / s)
    colors = np.full(m + 1, beta, dtype=np.int64)
    colors[-1] = s - m * beta
    counts = rng.multivariate_hypergeometric(colors, ones)[:m]
    wins, m = _majority_fraction(counts, beta)
    return Estimate(calibrate(beta, wins / m, params))


def calibrated_mean_of_medians(
    log: SampleLog | Iterable[int],
    params: CalibrationParams | None = None,
    *,
    rng: np.random.Generator | None = None,
    call: int = 0,
    identity_partition: bool = False,
    beta: int | None = None,
) -> Estimate:
    """Robust click-probability estimate for one item's log.

    Args:
        log: Observed click bits.
        params: Block-size constant and bisection settings.
        rng: Partition randomness. When omitted, a generator seeded from
            ``(params.partition_seed, call)`` is used, so identical
            ``(log, seed, call)`` always gives the identical estimate.
        call: Call counter mixed into the default partition seed.
        identity_partition: Use consecutive blocks of the log as stored
            instead of a random partition.
        beta: Force a block size (odd) instead of ``ceil(alpha log s)``.

    Returns:
        The calibrated estimate. Logs too short for a single block fall
        back to the plain mean; an empty log yields 0 flagged as low
        confidence.
    """
    params = params or CalibrationParams()
    if not isinstance(log, SampleLog):
        log = SampleLog(log)
    s = len(log)
    if beta is not None:
        _check_odd(beta)
    if not identity_partition:
        if rng is None:
            rng = np.random.default_rng([params.partition_seed, call])
        return mean_of_medians_from_counts(s, log.ones, params, rng, beta)

    if s == 0:
        return Estimate(0.0, True)
    if beta is None:
        if s < math.ceil(params.alpha * math.log(max(s, 2))):
            return Estimate(log.ones / s)
        beta = block_size(s, params.alpha)
    m = s // beta
    if m == 0:
        return Estimate(log.ones / s)
    blocks = log.as_array()[: m * beta].reshape(m, beta)
    wins, m = _majority_fraction(blocks.sum(axis=1), beta)
    return Estimate(calibrate(beta, wins / m, params))
