"""Command-line entry point: ``robust-cascade {run,summarize,ingest,check-calibration,sweep}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from robust_cascade import harness
from robust_cascade.estimators import CalibrationParams
from robust_cascade.ingest import IngestError, click_probabilities, load_summaries


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    if getattr(args, "seeds", None):
        cfg.seeds = harness.parse_seeds(args.seeds)
    if getattr(args, "out", None):
        cfg.out = Path(args.out)
    if getattr(args, "corruption_rate", None) is not None:
        cfg.corruption_budget = round(args.corruption_rate * cfg.horizon)
        cfg.corruption_kind = "flip-early" if cfg.corruption_budget > 0 else "none"
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(harness.load_config(args.config), args)
    traces = harness.run_experiment(cfg, jobs=args.jobs)
    print(harness.format_summary(harness.summarize(traces)), end="")
    print(f"wrote {len(traces)} traces to {cfg.out}", file=sys.stderr)
    return 0


def cmd_summarize(args) -> int:
    summary = harness.summarize(harness.load_traces(args.dir))
    text = harness.format_summary(summary)
    print(text, end="")
    if args.write:
        harness.write_summary(summary, Path(args.dir) / "summary.csv")
    return 0


def cmd_ingest(args) -> int:
    summaries = load_summaries(args.csv, args.rating_min, args.rating_max)
    probs = click_probabilities(summaries, args.prior_weight, args.sigmoid_slope, args.sigmoid_center)
    print("item_id,click_prob")
    for s, p in zip(summaries, probs):
        print(f"{s.item_id},{p!r}")
    return 0


def cmd_check_calibration(args) -> int:
    params = CalibrationParams(eta=args.eta, max_iters=args.max_iters)
    bound = params.eta + 2.0 ** -params.max_iters
    report = harness.calibration_report(params=params)
    ok = True
    print("block_size,max_abs_error,bound,status")
    for b, err in report.items():
        passed = err <= bound
        ok &= passed
        print(f"{b},{err:.3e},{bound:.3e},{'ok' if passed else 'FAIL'}")
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    base = harness.load_config(args.config)
    if args.seeds:
        base.seeds = harness.parse_seeds(args.seeds)
    root = Path(args.out) if args.out else base.out
    rates = [float(r) for r in args.corruption.split(",")]
    print("corruption_rate,policy,mean_final_regret,median_final_regret")
    for rate in rates:
        budget = round(rate * base.horizon)
        cfg = replace(
            base,
            corruption_budget=budget,
            corruption_kind="flip-early" if budget > 0 else "none",
            out=root / f"rate_{rate:g}",
        )
        summary = harness.summarize(harness.run_experiment(cfg, jobs=args.jobs))
        for s in summary["policies"].values():
            print(f"{rate:g},{s.policy},{s.mean:.6f},{s.median:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-cascade", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--seeds", help="count (10) or list (0,3,7 / 0-4)")
        p.add_argument("--out", help=f"output directory (default: ${harness.OUTPUT_ENV_VAR} or ./runs)")
        p.add_argument("--jobs", type=int, default=1, help="parallel (policy, seed) runs")

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config", nargs="?")
    p.add_argument("--config", dest="config_flag")
    p.add_argument("--corruption-rate", type=float, help="fraction of rounds corrupted, flip-early")
    experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="summarize trace CSVs in a directory")
    p.add_argument("dir")
    p.add_argument("--write", action="store_true", help="also write summary.csv")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("ingest", help="convert a rating-summary CSV into click probabilities")
    p.add_argument("csv")
    p.add_argument("--prior-weight", type=float)
    p.add_argument("--sigmoid-slope", type=float, default=1.5)
    p.add_argument("--sigmoid-center", type=float)
    p.add_argument("--rating-min", type=float, default=1.0)
    p.add_argument("--rating-max", type=float, default=5.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("check-calibration", help="round-trip report for the majority map inverse")
    p.add_argument("--eta", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=60)
    p.set_defaults(func=cmd_check_calibration)

    p = sub.add_parser("sweep", help="rerun a config over corruption rates")
    p.add_argument("config", nargs="?")
    p.add_argument("--config", dest="config_flag")
    p.add_argument("--corruption", default="0,0.05,0.1,0.15,0.2,0.25")
    experiment_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if hasattr(args, "config_flag"):
        args.config = args.config or args.config_flag
        if not args.config:
            parser.error(f"{args.command}: a config file is required")
    try:
        return args.func(args)
    except (harness.ConfigError, IngestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
