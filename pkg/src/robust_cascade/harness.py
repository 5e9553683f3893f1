"""Experiment driver: config, per-(policy, seed) runs, trace CSVs, summaries.

Each run replays the corrupted protocol round by round: the policy
recommends a list, the environment draws clicks, the adversary may flip
them, the policy sees the (possibly corrupted) cascade, and regret is
charged against the true click probabilities.

Randomness for a run is derived from its seed alone, split into an
environment stream and a policy stream, so a run produces the same trace
whether it is executed alone, in a batch, serially or in parallel.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from robust_cascade.core import EnvironmentSpec, expected_reward, optimal_list, sample_feedback
from robust_cascade.corruption import KINDS, AdversaryStrategy, CorruptionBudget, corrupt
from robust_cascade.estimators import CalibrationParams
from robust_cascade.ingest import click_probabilities, load_summaries
from robust_cascade.modelselect import M2UCBV, geometric_grid
from robust_cascade.policies import MUCBV, CascadeCBARBAR, CascadeUCBV, PolicyConfig

log = logging.getLogger(__name__)

POLICY_KINDS = ("mucbv", "m2ucbv", "cascade_ucbv", "cbarbar")
TRACE_COLUMNS = (
    "round",
    "policy",
    "seed",
    "chosen_list",
    "per_round_regret",
    "cumulative_regret",
    "corruption_spent",
)
OUTPUT_ENV_VAR = "ROBUST_CASCADE_OUT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    label: str = ""
    A: float | None = None
    B: float | None = None
    C_assumed: int | None = None
    delta: float | None = None

    @property
    def name(self) -> str:
        return self.label or self.kind


@dataclass
class ExperimentConfig:
    mu: tuple[float, ...]
    d: int
    horizon: int
    policies: tuple[PolicySpec, ...]
    seeds: tuple[int, ...] = (0,)
    corruption_kind: str = "none"
    corruption_budget: int = 0
    window_start: int = 1
    window_len: int = 0
    A: float = 2.0
    B: float = 3.0
    C_assumed: int = 0
    delta: float = 0.05
    cbarbar_lambda: float | None = None
    alpha: float = 16.0
    eta: float = 1e-6
    max_iters: int = 60
    ms_window: int | None = None
    ms_n_min: int | None = None
    ms_grid_max_exp: int | None = None
    out: Path = field(default_factory=lambda: Path(os.environ.get(OUTPUT_ENV_VAR, "runs")))

    def environment(self) -> EnvironmentSpec:
        return EnvironmentSpec(self.mu, self.d, self.horizon)

    def policy_config(self, spec: PolicySpec) -> PolicyConfig:
        c = self.C_assumed if spec.C_assumed is None else spec.C_assumed
        return PolicyConfig(
            A=self.A if spec.A is None else spec.A,
            B=self.B if spec.B is None else spec.B,
            C_assumed=0 if spec.kind == "cascade_ucbv" else c,
            delta=self.delta if spec.delta is None else spec.delta,
            estimator=CalibrationParams(self.alpha, self.eta, self.max_iters),
            cbarbar_lambda=self.cbarbar_lambda,
        )

    def strategy(self) -> AdversaryStrategy:
        return AdversaryStrategy(self.corruption_kind, self.window_start, self.window_len)

    def validate(self) -> None:
        try:
            self.environment()
            self.strategy()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.corruption_budget < 0:
            raise ConfigError("corruption.budget must be non-negative")
        if not self.policies:
            raise ConfigError("no policies configured")
        if not self.seeds:
            raise ConfigError("no seeds configured")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError(f"policy labels must be unique, got {names}")
        for spec in self.policies:
            if spec.kind not in POLICY_KINDS:
                raise ConfigError(f"unknown policy kind {spec.kind!r}; expected one of {POLICY_KINDS}")
            try:
                cfg = self.policy_config(spec)
            except ValueError as exc:
                raise ConfigError(f"policy {spec.name}: {exc}") from exc
            if spec.kind == "mucbv":
                warmup = 10 * len(self.mu) * cfg.C_assumed
                if warmup > self.horizon:
                    raise ConfigError(
                        f"policy {spec.name}: warm-up of {warmup} rounds exceeds horizon {self.horizon}"
                    )


def _policy_entry(entry: Any) -> PolicySpec:
    if isinstance(entry, str):
        return PolicySpec(entry)
    if isinstance(entry, Mapping):
        extra = set(entry) - {"kind", "label", "A", "B", "C_assumed", "delta"}
        if extra:
            raise ConfigError(f"unknown policy keys {sorted(extra)}")
        return PolicySpec(**entry)
    raise ConfigError(f"cannot read policy entry {entry!r}")


def _seeds(value: Any) -> tuple[int, ...]:
    if isinstance(value, int):
        return tuple(range(value))
    if isinstance(value, str):
        return parse_seeds(value)
    return tuple(int(s) for s in value)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"10"`` means seeds 0..9; ``"3,5,8"`` and ``"0-4"`` are explicit."""
    text = text.strip()
    if "," not in text and "-" not in text:
        return tuple(range(int(text)))
    seeds: list[int] = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            seeds.extend(range(int(a), int(b) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


def config_from_mapping(raw: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config from flat dotted keys (``corruption.kind: flip-early``)."""
    raw = dict(raw)
    known = {
        "environment.mu", "environment.source", "environment.d", "environment.horizon",
        "corruption.kind", "corruption.budget", "corruption.rate",
        "corruption.window_start", "corruption.window_len",
        "policies", "policy.kind", "policy.A", "policy.B", "policy.C_assumed", "policy.delta",
        "policy.cbarbar_lambda", "estimator.alpha", "estimator.eta", "estimator.max_iters",
        "modelselect.window", "modelselect.n_min", "modelselect.grid_max_exp",
        "ingest.prior_weight", "ingest.sigmoid_slope", "ingest.sigmoid_center",
        "ingest.rating_min", "ingest.rating_max", "seeds", "out",
    }
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")

    try:
        horizon = int(raw["environment.horizon"])
        d = int(raw["environment.d"])
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]}") from None

    if "environment.mu" in raw:
        mu = tuple(float(m) for m in raw["environment.mu"])
    elif "environment.source" in raw:
        src = Path(raw["environment.source"])
        if base_dir is not None and not src.is_absolute():
            src = base_dir / src
        summaries = load_summaries(
            src, float(raw.get("ingest.rating_min", 1.0)), float(raw.get("ingest.rating_max", 5.0))
        )
        mu = tuple(
            click_probabilities(
                summaries,
                raw.get("ingest.prior_weight"),
                float(raw.get("ingest.sigmoid_slope", 1.5)),
                raw.get("ingest.sigmoid_center"),
            )
        )
    else:
        raise ConfigError("need environment.mu or environment.source")

    if "policies" in raw:
        policies = tuple(_policy_entry(e) for e in raw["policies"])
    elif "policy.kind" in raw:
        kinds = raw["policy.kind"]
        policies = tuple(PolicySpec(k) for k in ([kinds] if isinstance(kinds, str) else kinds))
    else:
        raise ConfigError("need policies or policy.kind")

    if "corruption.budget" in raw and "corruption.rate" in raw:
        raise ConfigError("give corruption.budget or corruption.rate, not both")
    budget = int(raw.get("corruption.budget", 0))
    if "corruption.rate" in raw:
        budget = round(float(raw["corruption.rate"]) * horizon)
    kind = raw.get("corruption.kind", "flip-early" if budget > 0 else "none")

    def opt(key, cast):
        return cast(raw[key]) if raw.get(key) is not None else None

    cfg = ExperimentConfig(
        mu=mu,
        d=d,
        horizon=horizon,
        policies=policies,
        seeds=_seeds(raw.get("seeds", 1)),
        corruption_kind=kind,
        corruption_budget=budget,
        window_start=int(raw.get("corruption.window_start", 1)),
        window_len=int(raw.get("corruption.window_len", 0)),
        A=float(raw.get("policy.A", 2.0)),
        B=float(raw.get("policy.B", 3.0)),
        C_assumed=int(raw.get("policy.C_assumed", 0)),
        delta=float(raw.get("policy.delta", 0.05)),
        cbarbar_lambda=opt("policy.cbarbar_lambda", float),
        alpha=float(raw.get("estimator.alpha", 16.0)),
        eta=float(raw.get("estimator.eta", 1e-6)),
        max_iters=int(raw.get("estimator.max_iters", 60)),
        ms_window=opt("modelselect.window", int),
        ms_n_min=opt("modelselect.n_min", int),
        ms_grid_max_exp=opt("modelselect.grid_max_exp", int),
    )
    if "out" in raw:
        cfg.out = Path(raw["out"])
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected a key-value mapping")
    return config_from_mapping(raw, base_dir=path.parent)


def synthetic_mu(n_items: int = 16, low: float = 0.1, high: float = 0.85) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(low, high, n_items))


@dataclass
class RunTrace:
    policy: str
    seed: int
    lists: list[tuple[int, ...]]
    regret: np.ndarray
    cumulative: np.ndarray
    spent: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return int(self.regret.size)

    @property
    def total_regret(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    @property
    def total_spent(self) -> int:
        return int(self.spent.sum())


def make_policy(kind: str, env: EnvironmentSpec, config: PolicyConfig, rng: np.random.Generator, **ms):
    K, d, T = env.n_items, env.d, env.horizon
    if kind == "mucbv":
        return MUCBV(K, d, config, rng=rng)
    if kind == "cascade_ucbv":
        return CascadeUCBV(K, d, replace(config, C_assumed=0), rng=rng)
    if kind == "cbarbar":
        return CascadeCBARBAR(K, d, T, config, rng=rng)
    if kind == "m2ucbv":
        grid = geometric_grid(T, ms.get("grid_max_exp"))
        return M2UCBV(K, d, T, config, rng=rng, grid=grid, window=ms.get("window"), n_min=ms.get("n_min"))
    raise ConfigError(f"unknown policy kind {kind!r}")


def run_single(
    env: EnvironmentSpec,
    kind: str,
    config: PolicyConfig,
    seed: int,
    strategy: AdversaryStrategy | None = None,
    budget: int = 0,
    label: str | None = None,
    **ms,
) -> RunTrace:
    """Play one policy against one seeded environment and adversary."""
    strategy = strategy or AdversaryStrategy()
    env_ss, policy_ss = np.random.SeedSequence(seed).spawn(2)
    env_rng = np.random.default_rng(env_ss)
    policy = make_policy(kind, env, config, np.random.default_rng(policy_ss), **ms)
    ledger = CorruptionBudget(budget)

    mu = env.mu
    best = expected_reward(optimal_list(mu, env.d), mu)
    T = env.horizon
    regret = np.empty(T)
    spent = np.zeros(T, dtype=np.int64)
    lists: list[tuple[int, ...]] = []
    for t in range(1, T + 1):
        ranked = policy.recommend(t)
        feedback = sample_feedback(env, ranked, env_rng)
        before = ledger.spent
        feedback = corrupt(feedback, t, ledger, strategy)
        spent[t - 1] = ledger.spent - before
        if kind == "m2ucbv":
            policy.update(feedback, t)
        else:
            policy.update(feedback)
        regret[t - 1] = max(0.0, best - expected_reward(ranked, mu))
        lists.append(ranked.items)

    info: dict = {}
    if kind == "m2ucbv":
        info["survivors"] = policy.surviving_budgets()
        info["acted"] = [s.acted for s in policy.stats]
    if kind == "cbarbar":
        info["epochs"] = policy.history
    return RunTrace(label or kind, seed, lists, regret, np.cumsum(regret), spent, info)


def trace_to_csv(trace: RunTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for i in range(trace.horizon):
        w.writerow(
            (
                i + 1,
                trace.policy,
                trace.seed,
                " ".join(map(str, trace.lists[i])),
                repr(float(trace.regret[i])),
                repr(float(trace.cumulative[i])),
                int(trace.spent[i]),
            )
        )
    return buf.getvalue()


def read_trace(path: str | Path) -> RunTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {reader.fieldnames}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty trace")
    return RunTrace(
        rows[0]["policy"],
        int(rows[0]["seed"]),
        [tuple(int(x) for x in r["chosen_list"].split()) for r in rows],
        np.array([float(r["per_round_regret"]) for r in rows]),
        np.array([float(r["cumulative_regret"]) for r in rows]),
        np.array([int(r["corruption_spent"]) for r in rows], dtype=np.int64),
    )


def trace_filename(policy: str, seed: int) -> str:
    return f"trace_{policy}_seed{seed}.csv"


def _run_job(args) -> RunTrace:
    cfg, spec, seed = args
    return run_single(
        cfg.environment(),
        spec.kind,
        cfg.policy_config(spec),
        seed,
        cfg.strategy(),
        cfg.corruption_budget,
        label=spec.name,
        window=cfg.ms_window,
        n_min=cfg.ms_n_min,
        grid_max_exp=cfg.ms_grid_max_exp,
    )


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, write: bool = True) -> list[RunTrace]:
    """Run every (policy, seed) pair; write one CSV per run plus ``summary.csv``."""
    cfg.validate()
    work = [(cfg, spec, seed) for spec in cfg.policies for seed in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_run_job, work))
    else:
        traces = []
        for job in work:
            log.info("running %s seed=%d", job[1].name, job[2])
            traces.append(_run_job(job))
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for tr in traces:
            (out / trace_filename(tr.policy, tr.seed)).write_text(trace_to_csv(tr), encoding="utf-8")
        write_summary(summarize(traces), out / "summary.csv")
    return traces


@dataclass
class PolicySummary:
    policy: str
    n_runs: int
    mean: float
    median: float
    min: float
    max: float
    total_spent: int


def improvement(ours: float, other: float) -> float:
    """Relative regret reduction ``(other - ours) / other``; 0 when both are 0."""
    if other == 0:
        return 0.0 if ours == 0 else -math.inf
    return (other - ours) / other


def summarize(traces: Iterable[RunTrace]) -> dict:
    """Final-regret statistics per policy and pairwise improvements of means."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to summarize")
    horizons = {tr.horizon for tr in traces}
    if len(horizons) != 1:
        raise ValueError(f"traces have mismatched horizons {sorted(horizons)}")
    by_policy: dict[str, list[RunTrace]] = {}
    for tr in traces:
        by_policy.setdefault(tr.policy, []).append(tr)
    rows = {}
    for name, group in by_policy.items():
        finals = np.array([tr.total_regret for tr in group])
        rows[name] = PolicySummary(
            name,
            len(group),
            float(finals.mean()),
            float(np.median(finals)),
            float(finals.min()),
            float(finals.max()),
            max(tr.total_spent for tr in group),
        )
    pairwise = {
        (a, b): improvement(rows[a].mean, rows[b].mean) for a in rows for b in rows if a != b
    }
    return {"policies": rows, "improvement": pairwise, "horizon": horizons.pop()}


def format_summary(summary: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("policy", "runs", "mean_final_regret", "median", "min", "max", "max_corruption_spent"))
    for s in summary["policies"].values():
        w.writerow((s.policy, s.n_runs, f"{s.mean:.6f}", f"{s.median:.6f}", f"{s.min:.6f}", f"{s.max:.6f}", s.total_spent))
    w.writerow(())
    w.writerow(("ours", "other", "improvement"))
    for (a, b), v in summary["improvement"].items():
        w.writerow((a, b, f"{v:.6f}"))
    return buf.getvalue()


def write_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(format_summary(summary), encoding="utf-8")


def load_traces(directory: str | Path) -> list[RunTrace]:
    paths = sorted(Path(directory).glob("trace_*.csv"))
    if not paths:
        raise FileNotFoundError(f"no trace_*.csv files in {directory}")
    return [read_trace(p) for p in paths]


def calibration_report(
    bs: Sequence[int] = tuple(range(3, 32, 2)), n_grid: int = 99, params: CalibrationParams | None = None
) -> dict[int, float]:
    """Worst ``|q_b(calibrate(b, q_b(p))) - q_b(p)|`` per block size over a p-grid."""
    from robust_cascade.estimators import calibrate, q_b

    params = params or CalibrationParams()
    grid = np.linspace(0.01, 0.99, n_grid)
    report = {}
    for b in bs:
        ys = q_b(b, grid)
        report[b] = max(abs(float(q_b(b, calibrate(b, float(y), params))) - float(y)) for y in ys)
    return report
