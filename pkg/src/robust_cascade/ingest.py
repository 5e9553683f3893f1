"""Per-item rating summaries to click probabilities.

Ratings are shrunk toward a prior with a Bayesian average, then squashed
through a logistic curve. Input is a UTF-8 CSV with header
``item_id,avg_rating,num_ratings``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

HEADER = ("item_id", "avg_rating", "num_ratings")


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ItemRatingSummary:
    item_id: str
    avg_rating: float
    num_ratings: int


def bayesian_average(summary: ItemRatingSummary, prior_mean: float, prior_weight: float) -> float:
    if prior_weight < 0:
        raise ValueError("prior weight must be non-negative")
    n = summary.num_ratings
    return (prior_weight * prior_mean + n * summary.avg_rating) / (prior_weight + n)


def rating_to_click_prob(rating: float, slope: float = 1.5, center: float = 3.0) -> float:
    if slope <= 0:
        raise ValueError("sigmoid slope must be positive")
    z = slope * (rating - center)
    # split by sign to keep exp() from overflowing
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def load_summaries(
    path: str | Path, rating_min: float = 1.0, rating_max: float = 5.0
) -> list[ItemRatingSummary]:
    """Parse a summary CSV, failing on the first bad row with its line number."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise IngestError(f"line 1: expected header {','.join(HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestError(f"line {lineno}: expected 3 columns, got {len(row)}")
            item_id, raw_avg, raw_n = (c.strip() for c in row)
            try:
                avg = float(raw_avg)
                n = int(raw_n)
            except ValueError:
                raise IngestError(f"line {lineno}: non-numeric rating fields {row}") from None
            if not math.isfinite(avg) or not (rating_min <= avg <= rating_max):
                raise IngestError(f"line {lineno}: rating {avg} outside [{rating_min}, {rating_max}]")
            if n < 1:
                raise IngestError(f"line {lineno}: num_ratings must be >= 1, got {n}")
            out.append(ItemRatingSummary(item_id, avg, n))
    return out


def click_probabilities(
    summaries: Sequence[ItemRatingSummary],
    prior_weight: float | None = None,
    slope: float = 1.5,
    center: float | None = None,
) -> list[float]:
    """Click probability per item.

    The prior mean is the dataset-wide mean rating. ``prior_weight``
    defaults to the mean rating count and ``center`` to the prior mean.
    """
    if not summaries:
        raise IngestError("no items to convert")
    prior_mean = sum(s.avg_rating for s in summaries) / len(summaries)
    if prior_weight is None:
        prior_weight = sum(s.num_ratings for s in summaries) / len(summaries)
    if center is None:
        center = prior_mean
    return [
        rating_to_click_prob(bayesian_average(s, prior_mean, prior_weight), slope, center)
        for s in summaries
    ]
