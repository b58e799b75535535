"""Benchmark task files and the seeded training matrix built on them.

A task file is one JSON document binding a labeled environment to a temporal
goal plus the protocol around it: ranking parameters, strategies, seeds, and
step budgets.  The environment config is embedded verbatim, so a task file
fully determines its runs; repeating a (task, strategy, seed) triple yields a
byte-identical metrics CSV.
"""
from __future__ import annotations

import csv
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ecrl.dfa import Dfa, compile_text
from ecrl.envs import (CartpoleRegions, CartpoleRegionsConfig, DiscreteActions,
                       Gridworld, GridworldConfig, Waterworld,
                       WaterworldConfig, compass_actions)
from ecrl.ltlf import ParseError, parse
from ecrl.product import ProductEnv, TaskSpec
from ecrl.ranking import RankTable, rank_states
from ecrl.training import (STRATEGIES, ConfigError, MetricsLog, TrainConfig,
                           train)

ENV_KINDS = ("waterworld", "cartpole", "gridworld")
DEFAULT_HORIZONS = {"waterworld": 600, "cartpole": 500, "gridworld": 100}

# gradient learners keep the TrainConfig defaults; tabular Q-learning needs a
# much larger step size and has no warmup network to fill
TABULAR_DEFAULTS = {"learning_rate": 0.2, "batch_size": 16,
                    "learning_starts": 200, "buffer_capacity": 50_000}

TRAINING_KEYS = {"learningRate": "learning_rate", "batchSize": "batch_size",
                 "learningStarts": "learning_starts",
                 "bufferCapacity": "buffer_capacity", "hidden": "hidden",
                 "epsilonEnd": "epsilon_end", "polyakTau": "polyak_tau"}


def ordered_touch_formula(stages, alphabet):
    """Touch the stage colors in strict order, touching nothing in between
    and never a wrong color at a stage."""
    idle = " & ".join(f"!{a}" for a in alphabet)
    text = None
    for stage in reversed(stages):
        guard = " & ".join([stage] + [f"!{a}" for a in alphabet if a != stage])
        text = (f"({idle}) U ({guard})" if text is None
                else f"({idle}) U (({guard}) & X ({text}))")
    return text


def ordered_region_formula(regions):
    """Reach the regions in order; anything may happen in between."""
    text = f"F {regions[-1]}"
    for region in reversed(regions[:-1]):
        text = f"F ({region} & X {text})"
    return text


@dataclass(frozen=True)
class TaskDefinition:
    """One benchmark: environment, goal, ranking/replay knobs, run protocol."""

    name: str
    formula: str
    atoms: tuple
    env_kind: str
    env_config: dict
    reward: float = 100.0
    n_categories: int | None = None
    priority_constant: float = 1.0
    alpha: float = 0.75
    refresh_interval: int = 10
    gamma: float = 0.99
    strategies: tuple = STRATEGIES
    seeds: tuple = tuple(range(10))
    total_steps: int = 30_000
    full_total_steps: int | None = None
    horizon: int | None = None
    learner: str = "auto"
    encoding: str = "enumerated"
    training_overrides: tuple = ()

    def __post_init__(self):
        if not self.name or not all(c.isalnum() or c in "_-" for c in self.name):
            raise ConfigError(f"task name {self.name!r} is not a safe file stem")
        if self.env_kind not in ENV_KINDS:
            raise ConfigError(f"unknown environment kind {self.env_kind!r}")
        if self.total_steps <= 0:
            raise ConfigError("totalSteps must be positive")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ConfigError(f"unknown strategies {unknown}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        try:
            parse(self.formula, self.atoms)
        except ParseError as exc:
            raise ConfigError(f"bad formula: {exc}") from exc

    @property
    def episode_horizon(self):
        return self.horizon if self.horizon is not None \
            else DEFAULT_HORIZONS[self.env_kind]

    def to_json(self) -> dict:
        doc = {
            "name": self.name,
            "formula": self.formula,
            "atoms": list(self.atoms),
            "environment": {"kind": self.env_kind, "config": self.env_config},
            "reward": self.reward,
            "N": self.n_categories,
            "C": self.priority_constant,
            "alpha": self.alpha,
            "K": self.refresh_interval,
            "gamma": self.gamma,
            "strategies": list(self.strategies),
            "seeds": list(self.seeds),
            "totalSteps": self.total_steps,
        }
        if self.full_total_steps is not None:
            doc["fullTotalSteps"] = self.full_total_steps
        if self.horizon is not None:
            doc["horizon"] = self.horizon
        if self.learner != "auto":
            doc["learner"] = self.learner
        if self.encoding != "enumerated":
            doc["encoding"] = self.encoding
        if self.training_overrides:
            inverse = {v: k for k, v in TRAINING_KEYS.items()}
            doc["training"] = {inverse[k]: v for k, v in self.training_overrides}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "TaskDefinition":
        try:
            env = doc["environment"]
            overrides = []
            for key, value in doc.get("training", {}).items():
                if key not in TRAINING_KEYS:
                    raise ConfigError(f"unknown training override {key!r}")
                if key == "hidden":
                    value = tuple(value)
                overrides.append((TRAINING_KEYS[key], value))
            return cls(
                name=doc["name"],
                formula=doc["formula"],
                atoms=tuple(doc["atoms"]),
                env_kind=env["kind"],
                env_config=env["config"],
                reward=doc.get("reward", 100.0),
                n_categories=doc.get("N"),
                priority_constant=doc.get("C", 1.0),
                alpha=doc.get("alpha", 0.75),
                refresh_interval=doc.get("K", 10),
                gamma=doc.get("gamma", 0.99),
                strategies=tuple(doc.get("strategies", STRATEGIES)),
                seeds=tuple(doc.get("seeds", range(10))),
                total_steps=doc.get("totalSteps", 30_000),
                full_total_steps=doc.get("fullTotalSteps"),
                horizon=doc.get("horizon"),
                learner=doc.get("learner", "auto"),
                encoding=doc.get("encoding", "enumerated"),
                training_overrides=tuple(overrides),
            )
        except KeyError as missing:
            raise ConfigError(f"task file is missing {missing}") from None


def load_task(path) -> TaskDefinition:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
    task = TaskDefinition.from_json(doc)
    base = build_base_env(task)
    missing = set(task.atoms) - set(base.propositions)
    if missing:
        raise ConfigError(f"environment never emits {sorted(missing)}")
    return task


def save_task(task: TaskDefinition, path):
    with open(path, "w") as fh:
        json.dump(task.to_json(), fh, indent=2)
        fh.write("\n")


# --- constructing the pieces ------------------------------------------------

def build_dfa(task: TaskDefinition) -> Dfa:
    return compile_text(task.formula, task.atoms)


def build_rank_table(task: TaskDefinition, dfa: Dfa) -> RankTable:
    n = task.n_categories
    if n is not None:
        n = max(3, min(n, dfa.n_states))
    return rank_states(dfa, n_categories=n,
                       priority_constant=task.priority_constant)


def build_base_env(task: TaskDefinition):
    if task.env_kind == "waterworld":
        env = Waterworld(WaterworldConfig.from_json(task.env_config))
        if task.learner == "dqn":
            env = DiscreteActions(env, compass_actions(env.action_scale))
        return env
    if task.env_kind == "cartpole":
        env = CartpoleRegions(CartpoleRegionsConfig.from_json(task.env_config))
        if task.learner == "dqn":
            f = env.action_scale
            env = DiscreteActions(env, [[-f], [0.0], [f]])
        return env
    return Gridworld(GridworldConfig.from_json(task.env_config))


def build_env(task: TaskDefinition, strategy: str, delayed: bool = False,
              mode: str | None = None) -> ProductEnv:
    """Product environment for one run; shaped strategies get the rank table."""
    dfa = build_dfa(task)
    shaped = strategy in ("RS", "EC")
    table = build_rank_table(task, dfa) if shaped else None
    spec = TaskSpec(formula=task.formula, reward=task.reward, gamma=task.gamma)
    return ProductEnv(build_base_env(task), dfa, spec, rank_table=table,
                      mode=mode or task.encoding, horizon=task.episode_horizon,
                      delayed_automaton_step=delayed)


def make_train_config(task: TaskDefinition, strategy: str, seed: int,
                      total_steps: int | None = None,
                      alpha: float | None = None) -> TrainConfig:
    kwargs = dict(
        strategy=strategy,
        total_steps=total_steps if total_steps is not None else task.total_steps,
        seed=seed,
        gamma=task.gamma,
        alpha=task.alpha if alpha is None else alpha,
        refresh_interval=task.refresh_interval,
        learner=task.learner,
    )
    if task.env_kind == "gridworld" and task.learner in ("auto", "tabular"):
        kwargs.update(TABULAR_DEFAULTS)
    kwargs.update(dict(task.training_overrides))
    return TrainConfig(**kwargs)


# --- per-run metrics --------------------------------------------------------

def steps_to_first_success(log: MetricsLog):
    """Cumulative step count at the first successful episode, None if never."""
    for row in log.rows:
        if row["success"]:
            return row["steps"]
    return None


def steps_to_success_rate(log: MetricsLog, threshold: float = 0.8,
                          window: int = 20):
    """First step count at which the trailing success rate clears threshold."""
    successes = log.column("success")
    for e in range(window - 1, len(successes)):
        if sum(successes[e - window + 1:e + 1]) / window >= threshold:
            return log.rows[e]["steps"]
    return None


def reward_curve_area(log: MetricsLog, budget: int) -> float:
    """Area under cumulative raw reward vs steps: each episode's return
    counts from the step it lands on until the budget runs out."""
    return float(sum(row["raw_return"] * max(0, budget - row["steps"])
                     for row in log.rows))


def rewards_per_step(log: MetricsLog) -> float:
    if not log.rows:
        return 0.0
    return sum(log.column("raw_return")) / log.rows[-1]["steps"]


def final_success_rate(log: MetricsLog, window: int = 20) -> float:
    tail = log.column("success")[-window:]
    return sum(tail) / len(tail) if tail else 0.0


RUN_FIELDS = ("task", "strategy", "seed", "steps", "episodes", "wall_seconds",
              "steps_to_first_success", "steps_to_success_threshold",
              "reward_curve_area", "rewards_per_step", "final_success_rate")


def run_summary_row(task_name, strategy, seed, log: MetricsLog, budget: int,
                    wall_seconds=None) -> dict:
    """One runs.csv row; every field except wall_seconds is recomputable
    offline from the per-run metrics CSV."""
    return {
        "task": task_name,
        "strategy": strategy,
        "seed": seed,
        "steps": log.rows[-1]["steps"] if log.rows else 0,
        "episodes": len(log.rows),
        "wall_seconds": wall_seconds,
        "steps_to_first_success": steps_to_first_success(log),
        "steps_to_success_threshold": steps_to_success_rate(log),
        "reward_curve_area": reward_curve_area(log, budget),
        "rewards_per_step": rewards_per_step(log),
        "final_success_rate": final_success_rate(log),
    }


# --- running the matrix -----------------------------------------------------

def run_csv_name(strategy: str, seed: int) -> str:
    return f"{strategy}_seed{seed}.csv"


def run_one(task: TaskDefinition, strategy: str, seed: int, out_dir,
            delayed: bool = False, total_steps: int | None = None,
            alpha: float | None = None) -> dict:
    """Train one (strategy, seed) cell, write its CSV, return its row."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = build_env(task, strategy, delayed=delayed)
    cfg = make_train_config(task, strategy, seed, total_steps=total_steps,
                            alpha=alpha)
    started = time.perf_counter()
    result = train(env, cfg)
    wall = time.perf_counter() - started
    result.metrics.write(out_dir / run_csv_name(strategy, seed))
    return run_summary_row(task.name, strategy, seed, result.metrics,
                           cfg.total_steps, wall_seconds=round(wall, 3))


def _matrix_worker(args):
    doc, out_dir, strategy, seed, delayed, total_steps, alpha = args
    task = TaskDefinition.from_json(doc)
    return run_one(task, strategy, seed, out_dir, delayed=delayed,
                   total_steps=total_steps, alpha=alpha)


def _run_cells(task, cells, out_dirs, jobs, delayed, total_steps, alphas):
    args = [(task.to_json(), str(d), s, k, delayed, total_steps, a)
            for (s, k), d, a in zip(cells, out_dirs, alphas)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_matrix_worker, args))
    return [_matrix_worker(a) for a in args]


def run_matrix(task: TaskDefinition, out_root, strategies=None, seeds=None,
               jobs: int = 1, delayed: bool = False,
               total_steps: int | None = None) -> list:
    """Train every (strategy, seed) cell and write runs/summary/curves CSVs."""
    strategies = tuple(strategies or task.strategies)
    seeds = tuple(seeds if seeds is not None else task.seeds)
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        raise ConfigError(f"unknown strategies {unknown}")
    task_dir = Path(out_root) / task.name
    cells = [(s, k) for s in strategies for k in seeds]
    rows = _run_cells(task, cells, [task_dir] * len(cells), jobs, delayed,
                      total_steps, [None] * len(cells))
    write_rows(task_dir / "runs.csv", RUN_FIELDS, rows)
    summary = aggregate_rows(rows, baseline="BASE")
    write_rows(task_dir / "summary.csv", SUMMARY_FIELDS, summary)
    curves = curve_rows(task_dir, strategies, seeds)
    write_rows(task_dir / "curves.csv", CURVE_FIELDS, curves)
    return rows


def run_alpha_sweep(task: TaskDefinition, out_root, alphas, seeds=None,
                    jobs: int = 1, delayed: bool = False,
                    total_steps: int | None = None) -> list:
    """Classified-replay exponent sweep; one subdirectory per alpha value."""
    seeds = tuple(seeds if seeds is not None else task.seeds)
    task_dir = Path(out_root) / task.name
    cells, dirs, values = [], [], []
    for a in alphas:
        for k in seeds:
            cells.append(("EC", k))
            dirs.append(task_dir / f"alpha_{a:g}")
            values.append(a)
    rows = _run_cells(task, cells, dirs, jobs, delayed, total_steps, values)
    for row, a in zip(rows, values):
        row["alpha"] = a
    write_rows(task_dir / "alpha_runs.csv", ("alpha",) + RUN_FIELDS, rows)
    summary = []
    for a in alphas:
        areas = [r["reward_curve_area"] for r in rows if r["alpha"] == a]
        summary.append({"alpha": a, "runs": len(areas),
                        "median_reward_curve_area": statistics.median(areas)})
    write_rows(task_dir / "alpha_summary.csv",
               ("alpha", "runs", "median_reward_curve_area"), summary)
    return rows


# --- aggregation ------------------------------------------------------------

SUMMARY_FIELDS = ("strategy", "runs", "median_steps_to_first_success",
                  "success_reached_fraction", "median_steps_to_success_threshold",
                  "median_reward_curve_area", "mean_rewards_per_step",
                  "mean_final_success_rate", "pct_improvement_vs_baseline")

CURVE_FIELDS = ("strategy", "episode", "mean_steps", "mean_raw_return",
                "mean_shaped_return", "mean_success", "mean_reward_per_step")


def censored_median(values):
    """Median with None treated as off-the-end; None when that wins."""
    filled = [math.inf if v is None else v for v in values]
    med = statistics.median(filled)
    return None if math.isinf(med) else med


def aggregate_rows(rows, baseline: str = "BASE") -> list:
    by_strategy = {}
    for row in rows:
        by_strategy.setdefault(row["strategy"], []).append(row)
    base_rps = None
    if baseline in by_strategy:
        base_rps = statistics.fmean(
            r["rewards_per_step"] for r in by_strategy[baseline])
    out = []
    for strategy, group in by_strategy.items():
        rps = statistics.fmean(r["rewards_per_step"] for r in group)
        improvement = None
        if base_rps and base_rps > 0:
            improvement = round(100.0 * (rps - base_rps) / base_rps, 2)
        out.append({
            "strategy": strategy,
            "runs": len(group),
            "median_steps_to_first_success": censored_median(
                [r["steps_to_first_success"] for r in group]),
            "success_reached_fraction": statistics.fmean(
                r["steps_to_first_success"] is not None for r in group),
            "median_steps_to_success_threshold": censored_median(
                [r["steps_to_success_threshold"] for r in group]),
            "median_reward_curve_area": statistics.median(
                r["reward_curve_area"] for r in group),
            "mean_rewards_per_step": rps,
            "mean_final_success_rate": statistics.fmean(
                r["final_success_rate"] for r in group),
            "pct_improvement_vs_baseline": improvement,
        })
    return out


def curve_rows(task_dir, strategies, seeds) -> list:
    """Per-episode means across seeds, recomputed from the run CSVs."""
    out = []
    for strategy in strategies:
        logs = [MetricsLog.read(Path(task_dir) / run_csv_name(strategy, k))
                for k in seeds]
        n = min(len(log.rows) for log in logs)
        for e in range(n):
            rows = [log.rows[e] for log in logs]
            out.append({
                "strategy": strategy,
                "episode": e + 1,
                "mean_steps": statistics.fmean(r["steps"] for r in rows),
                "mean_raw_return": statistics.fmean(
                    r["raw_return"] for r in rows),
                "mean_shaped_return": statistics.fmean(
                    r["shaped_return"] for r in rows),
                "mean_success": statistics.fmean(
                    float(r["success"]) for r in rows),
                "mean_reward_per_step": statistics.fmean(
                    r["raw_return"] / r["ep_length"] for r in rows),
            })
    return out


def write_rows(path, fieldnames, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row[k])
                             for k in fieldnames})


def read_rows(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
