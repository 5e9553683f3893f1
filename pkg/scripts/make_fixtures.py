"""Regenerate the synthetic 500-item rating-summary fixtures in ``data/``.

The files mimic the shape of pre-aggregated review data for three kinds of
catalogue (local businesses, films, music artists). They are synthetic:
ratings and counts come from fixed-seed draws, not from any real dataset.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

# (name, rating mean, rating spread, log-count mean, log-count spread, seed)
PROFILES = (
    ("business", 3.6, 0.7, 3.5, 1.2, 11),
    ("movie", 3.3, 0.5, 4.5, 1.5, 12),
    ("artist", 3.9, 0.4, 5.0, 1.8, 13),
)


def make(name: str, loc: float, scale: float, log_n: float, log_sd: float, seed: int, n_items: int = 500) -> str:
    rng = np.random.default_rng(seed)
    ratings = np.clip(rng.normal(loc, scale, n_items), 1.0, 5.0)
    counts = np.maximum(1, np.round(rng.lognormal(log_n, log_sd, n_items))).astype(int)
    rows = ["item_id,avg_rating,num_ratings"]
    rows += [f"{name}_{i:04d},{r:.3f},{n}" for i, (r, n) in enumerate(zip(ratings, counts))]
    return "\n".join(rows) + "\n"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parents[1] / "data", type=Path)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, *params in PROFILES:
        path = args.out / f"synthetic_{name}_500.csv"
        path.write_text(make(name, *params), encoding="utf-8", newline="\n")
        print(path)


if __name__ == "__main__":
    main()
