"""Off-policy training loop over a product environment.

Four strategies share one loop and differ only where the design says
they may: BASE stores raw rewards in a uniform buffer, RS stores shaped
rewards in a uniform buffer, EC stores shaped rewards in a buffer
partitioned by the successor automaton state's category, and PER stores
raw rewards under TD-error-proportional sampling.  Reward shaping itself
lives in the environment wrapper; the trainer verifies the wrapper and
the strategy agree before the first step.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from ecrl.agents import DqnAgent, TabularQAgent, Td3Agent
from ecrl.replay import (ClassifiedReplayBuffer, Experience,
                         PrioritizedReplayBuffer, UniformReplayBuffer)

STRATEGIES = ("BASE", "RS", "PER", "EC")
SHAPED_STRATEGIES = ("RS", "EC")


class ConfigError(ValueError):
    """Inconsistent strategy/environment/learner combination."""


@dataclass(frozen=True)
class TrainConfig:
    strategy: str
    total_steps: int
    total_episodes: int | None = None
    seed: int = 0
    gamma: float = 0.99
    learning_rate: float = 3e-4
    batch_size: int = 64
    learning_starts: int = 1000
    buffer_capacity: int = 100_000
    polyak_tau: float = 0.005
    exploration_noise_std: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    alpha: float = 0.75
    refresh_interval: int = 10
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    policy_delay: int = 2
    hidden: tuple = (64, 64)
    learner: str = "auto"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.learner not in ("auto", "tabular", "dqn", "td3"):
            raise ConfigError(f"unknown learner {self.learner!r}")
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")
        if self.total_episodes is not None and self.total_episodes <= 0:
            raise ConfigError("total_episodes must be positive when set")

    @property
    def shaped(self):
        return self.strategy in SHAPED_STRATEGIES


@dataclass
class MetricsLog:
    """Per-episode training record; serializes to one CSV."""
    fieldnames = ("episode", "steps", "raw_return", "shaped_return", "success",
                  "ep_length", "buffer_sizes", "probs", "shaping", "classified")
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def column(self, name):
        return [row[name] for row in self.rows]

    def to_csv(self):
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=self.fieldnames)
        writer.writeheader()
        for row in self.rows:
            flat = dict(row)
            flat["buffer_sizes"] = ";".join(str(v) for v in row["buffer_sizes"])
            flat["probs"] = ";".join(repr(p) for p in row["probs"])
            writer.writerow(flat)
        return out.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read(cls, path):
        log = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                log.add(
                    episode=int(row["episode"]), steps=int(row["steps"]),
                    raw_return=float(row["raw_return"]),
                    shaped_return=float(row["shaped_return"]),
                    success=row["success"] == "True",
                    ep_length=int(row["ep_length"]),
                    buffer_sizes=[int(v) for v in row["buffer_sizes"].split(";") if v],
                    probs=[float(p) for p in row["probs"].split(";") if p],
                    shaping=row["shaping"] == "True",
                    classified=row["classified"] == "True")
        return log


def _check_consistency(env, cfg: TrainConfig):
    if cfg.shaped and env.rank_table is None:
        raise ConfigError(f"{cfg.strategy} needs a shaping rank table on the env")
    if not cfg.shaped and env.rank_table is not None:
        raise ConfigError(f"{cfg.strategy} must run on an unshaped env")


def _pick_learner(env, cfg: TrainConfig):
    kind = cfg.learner
    if kind == "auto":
        if env.is_tabular:
            kind = "tabular"
        elif hasattr(env, "n_actions"):
            kind = "dqn"
        else:
            kind = "td3"
    if kind == "tabular" and not env.is_tabular:
        raise ConfigError("tabular learner on a non-tabular environment")
    if kind == "dqn" and not hasattr(env, "n_actions"):
        raise ConfigError("dqn needs a discrete action space")
    if kind == "td3" and not hasattr(env, "action_dim"):
        raise ConfigError("td3 needs a continuous action space")
    return kind


def _build_agent(kind, env, cfg: TrainConfig, rng):
    if kind == "tabular":
        return TabularQAgent(env.n_actions, cfg.learning_rate, cfg.gamma, rng)
    if kind == "dqn":
        return DqnAgent(env.observation_dim, env.n_actions, rng, hidden=cfg.hidden,
                        learning_rate=cfg.learning_rate, gamma=cfg.gamma,
                        polyak_tau=cfg.polyak_tau)
    return Td3Agent(env.observation_dim, env.action_dim, env.action_scale, rng,
                    hidden=cfg.hidden, learning_rate=cfg.learning_rate,
                    gamma=cfg.gamma, polyak_tau=cfg.polyak_tau,
                    policy_delay=cfg.policy_delay)


def _build_buffer(env, cfg: TrainConfig, rng):
    if cfg.strategy == "EC":
        return ClassifiedReplayBuffer(cfg.buffer_capacity,
                                      env.rank_table.priorities, cfg.alpha, rng)
    if cfg.strategy == "PER":
        return PrioritizedReplayBuffer(cfg.buffer_capacity, rng,
                                       alpha=cfg.per_alpha)
    return UniformReplayBuffer(cfg.buffer_capacity, rng)


@dataclass
class TrainResult:
    agent: object
    learner: str
    metrics: MetricsLog
    env: object
    buffer: object


def train(env, cfg: TrainConfig) -> TrainResult:
    """Run the training loop to cfg.total_steps and return agent + metrics."""
    _check_consistency(env, cfg)
    kind = _pick_learner(env, cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    env_rng, agent_rng, buffer_rng, explore_rng = \
        (np.random.default_rng(s) for s in seeds)
    agent = _build_agent(kind, env, cfg, agent_rng)
    buffer = _build_buffer(env, cfg, buffer_rng)
    metrics = MetricsLog()

    decay_steps = max(1, int(cfg.total_steps * cfg.epsilon_decay_fraction))
    probs = []
    refreshed = False
    steps = 0
    episode = 0
    while steps < cfg.total_steps and (cfg.total_episodes is None
                                       or episode < cfg.total_episodes):
        episode += 1
        if (cfg.strategy == "EC" and episode % cfg.refresh_interval == 0
                and len(buffer) > 0):
            probs = [float(p) for p in buffer.refresh_probs()]
            refreshed = True
        obs = env.reset(env_rng)
        if env.terminated:
            raise ConfigError("episode is terminal at reset; check the task/map")
        state = obs.key() if kind == "tabular" else obs.vector()
        raw_return = shaped_return = 0.0
        ep_len = 0
        success = False
        while not env.terminated and steps < cfg.total_steps:
            if kind == "td3":
                if steps < cfg.learning_starts:
                    action = explore_rng.uniform(-env.action_scale, env.action_scale,
                                                 size=env.action_dim)
                else:
                    action = agent.act(state, noise_std=cfg.exploration_noise_std)
            else:
                frac = min(1.0, steps / decay_steps)
                epsilon = cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)
                action = agent.act(state, epsilon=epsilon)
            obs, reward, done, info = env.step(action)
            next_state = obs.key() if kind == "tabular" else obs.vector()
            steps += 1
            ep_len += 1
            raw_return += info["raw_reward"]
            shaped_return += reward
            success = info["success"]
            terminated = info["task_terminal"] or info["base_terminal"]
            category = (env.rank_table.rank[info["q_next"]]
                        if cfg.strategy == "EC" else 0)
            buffer.push(Experience(state, action, reward, next_state,
                                   terminated, category))
            state = next_state

            if steps >= cfg.learning_starts and len(buffer) >= cfg.batch_size:
                if cfg.strategy == "EC":
                    if not refreshed:
                        probs = [float(p) for p in buffer.refresh_probs()]
                        refreshed = True
                    batch = buffer.sample(cfg.batch_size)
                    agent.update(batch)
                elif cfg.strategy == "PER":
                    beta = cfg.per_beta0 + (1.0 - cfg.per_beta0) * min(
                        1.0, steps / cfg.total_steps)
                    batch, indices, weights = buffer.sample(cfg.batch_size, beta)
                    td = agent.update(batch, weights=weights)
                    buffer.update_priorities(indices, td)
                else:
                    batch = buffer.sample(cfg.batch_size)
                    agent.update(batch)

        sizes = (list(buffer.sizes()) if cfg.strategy == "EC" else [len(buffer)])
        metrics.add(episode=episode, steps=steps, raw_return=raw_return,
                    shaped_return=shaped_return, success=success, ep_length=ep_len,
                    buffer_sizes=sizes, probs=list(probs), shaping=cfg.shaped,
                    classified=cfg.strategy == "EC")
    return TrainResult(agent=agent, learner=kind, metrics=metrics, env=env,
                       buffer=buffer)


def evaluate(env, result: TrainResult, episodes: int, rng: np.random.Generator,
             max_steps: int = 1000):
    """Greedy rollouts without exploration; returns (success_rate, mean_raw)."""
    agent = result.agent
    wins = 0
    raw_totals = []
    for _ in range(episodes):
        obs = env.reset(rng)
        state = obs.key() if result.learner == "tabular" else obs.vector()
        total = 0.0
        success = False
        for _ in range(max_steps):
            if env.terminated:
                break
            action = agent.greedy(state)
            obs, _, _, info = env.step(action)
            state = obs.key() if result.learner == "tabular" else obs.vector()
            total += info["raw_reward"]
            success = info["success"]
        wins += success
        raw_totals.append(total)
    return wins / episodes, float(np.mean(raw_totals))


def save_policy(result: TrainResult, path):
    """Flat parameter dump; tabular tables go to JSON, networks to npz."""
    if result.learner == "tabular":
        table = [[list(base), q, list(values)]
                 for (base, q), values in sorted(result.agent.table.items())]
        with open(path, "w") as fh:
            json.dump({"kind": "tabular", "table": table}, fh)
        return
    arrays = {}
    if result.learner == "dqn":
        arrays.update(result.agent.online.to_arrays("online_"))
    else:
        arrays.update(result.agent.actor.to_arrays("actor_"))
        arrays.update(result.agent.critic_1.to_arrays("critic1_"))
        arrays.update(result.agent.critic_2.to_arrays("critic2_"))
    np.savez(path, **arrays)
