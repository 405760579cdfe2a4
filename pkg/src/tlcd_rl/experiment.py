"""Multi-seed experiment orchestration and learning-curve CSV files."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

import numpy as np

from .environments import load_environment
from .learner import LearnerConfig, train

CSV_HEADER = ("run_id", "training_step", "mean_eval_reward")
ALGORITHMS = ("qtlcd", "qrm")

# Per-environment training budgets. They only need to outlast convergence.
ENV_DEFAULTS = {
    "smalloffice": dict(eplength=1000, total_training_steps=400_000, eval_every=1000),
    "largeoffice": dict(eplength=1000, total_training_steps=3_000_000, eval_every=10_000),
    "crossroad": dict(eplength=5000, total_training_steps=60_000, eval_every=200),
    "seed": dict(eplength=10, total_training_steps=2000, eval_every=50),
}


def default_learner_config(env: str, **overrides) -> LearnerConfig:
    base = dict(ENV_DEFAULTS.get(env, {}))
    base.update({k: v for k, v in overrides.items() if v is not None})
    return LearnerConfig(**base)


@dataclass
class ExperimentConfig:
    env: str = "smalloffice"
    algorithm: str = "qtlcd"
    runs: int = 10
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    out: Path | None = None
    svg: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class RunResult:
    run_id: int
    curve: list[tuple[int, float]]
    episode_lengths: list[int]


def _one_run(env: str, algorithm: str, learner: LearnerConfig, run_id: int) -> RunResult:
    case = load_environment(env)
    cfg = replace(learner, seed=learner.seed + run_id)
    result = train(case.mdp, case.task, cfg, tlcd=case.tlcd if algorithm == "qtlcd" else None)
    return RunResult(run_id, result.curve, [e.steps for e in result.episodes])


def run_experiment(cfg: ExperimentConfig) -> list[RunResult]:
    """Train ``cfg.runs`` independent runs, seeded ``learner.seed + run_id``.

    With ``workers > 1`` the runs fan out to a process pool; results come
    back ordered by run id either way.
    """
    args = [(cfg.env, cfg.algorithm, cfg.learner, r) for r in range(cfg.runs)]
    if cfg.workers == 1 or cfg.runs == 1:
        results = [_one_run(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.runs)) as pool:
            results = list(pool.map(_one_run, *zip(*args)))
    return sorted(results, key=lambda r: r.run_id)


def format_csv(results: Iterable[RunResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for res in results:
        for step, reward in res.curve:
            writer.writerow((res.run_id, step, f"{reward:.6g}"))
    return buf.getvalue()


def read_csv(path: str | Path) -> dict[int, list[tuple[int, float]]]:
    curves: dict[int, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for run_id, step, reward in reader:
            curves.setdefault(int(run_id), []).append((int(step), float(reward)))
    return curves


def mean_curve(curves: Sequence[Sequence[tuple[int, float]]]) -> tuple[np.ndarray, np.ndarray]:
    """Steps and per-step mean over runs, truncated to the shortest run."""
    n = min(len(c) for c in curves)
    steps = np.array([s for s, _ in curves[0][:n]])
    rewards = np.array([[r for _, r in c[:n]] for c in curves])
    return steps, rewards.mean(axis=0)


def convergence_step(curves, threshold: float = 0.95, sustain: int = 3) -> int | None:
    """First step at which the mean curve is at least ``threshold`` and stays
    there for ``sustain`` consecutive evaluations; None if it never does."""
    steps, mean = mean_curve(list(curves))
    ok = mean >= threshold
    for i in range(len(ok) - sustain + 1):
        if ok[i:i + sustain].all():
            return int(steps[i])
    return None


def median_episode_length(results: Iterable[RunResult]) -> float:
    lengths = [n for r in results for n in r.episode_lengths]
    return float(median(lengths)) if lengths else float("nan")


def cmd_run(cfg: ExperimentConfig) -> list[RunResult]:
    """Run the experiment, write the CSV (and the figure when requested)."""
    results = run_experiment(cfg)
    text = format_csv(results)
    if cfg.out is not None:
        Path(cfg.out).write_text(text)
    if cfg.svg is not None:
        from .plotting import plot_curves
        plot_curves({cfg.algorithm: [r.curve for r in results]}, cfg.svg,
                    title=f"{cfg.env}: {cfg.runs} runs")
    return results


def describe(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["out"] = str(cfg.out) if cfg.out else None
    d["svg"] = str(cfg.svg) if cfg.svg else None
    return d
