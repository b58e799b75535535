"""Synchronized product of a base environment with a task automaton.

The wrapper advances the automaton on the labels of visited base states,
joins the automaton state into the observation, pays the task reward on
entering an accepting state, optionally applies potential-based shaping
from a rank table, and terminates on acceptance, rejection, base-env
termination, or the horizon.
"""
from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ecrl.dfa import Dfa
from ecrl.ranking import RankTable


class StepAfterTermination(Exception):
    """step() called on a finished episode."""


class NotTabularError(Exception):
    """A finite-state-space operation was asked of a continuous env."""


@dataclass(frozen=True)
class TaskSpec:
    """A temporal task: satisfy `formula` for a one-time `reward`."""
    formula: str
    reward: float = 100.0
    gamma: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")


def product_state_count(n_base_states: int, n_automaton_states: int,
                        mode: str = "enumerated") -> int:
    """Joint state-space size under the chosen automaton encoding.

    The enumerated encoding adds one |Q|-valued variable; the one-hot
    encoding adds |Q| booleans whose naive assignment space is 2^|Q|.
    """
    if mode == "enumerated":
        return n_automaton_states * n_base_states
    if mode == "onehot":
        return (2 ** n_automaton_states) * n_base_states
    raise ValueError(f"unknown encoding mode {mode!r}")


@lru_cache(maxsize=None)
def _state_features(n_states: int, mode: str) -> tuple:
    """Frozen per-state feature tails: a scalar in [0, 1] for enumerated,
    an indicator row for onehot. Built once per automaton size."""
    if mode == "enumerated":
        span = (n_states - 1) or 1
        rows = [np.array([q / span]) for q in range(n_states)]
    else:
        rows = [np.zeros(n_states) for _ in range(n_states)]
        for q, row in enumerate(rows):
            row[q] = 1.0
    for row in rows:
        row.setflags(write=False)
    return tuple(rows)


@dataclass(frozen=True)
class ProductObservation:
    base: object
    q: int
    n_automaton_states: int
    mode: str = "enumerated"

    def vector(self):
        base = np.asarray(self.base, dtype=float).ravel()
        n = base.size
        tail = _state_features(self.n_automaton_states, self.mode)[self.q]
        out = np.empty(n + tail.size)
        out[:n] = base
        out[n:] = tail
        return out

    def key(self):
        """Hashable (base, q) pair for tabular learners."""
        return (self.base, self.q)


class ProductEnv:
    def __init__(self, base_env, dfa: Dfa, task: TaskSpec,
                 rank_table: RankTable | None = None, mode: str = "enumerated",
                 horizon: int | None = None, delayed_automaton_step: bool = False,
                 labeling=None):
        if mode not in ("enumerated", "onehot"):
            raise ValueError(f"unknown encoding mode {mode!r}")
        missing = set(dfa.atoms) - set(base_env.propositions)
        if missing:
            raise ValueError(f"base environment never emits {sorted(missing)}")
        self.base_env = base_env
        self.dfa = dfa
        self.task = task
        self.rank_table = rank_table
        self.mode = mode
        self.horizon = horizon
        self.delayed = delayed_automaton_step
        self.labeling = labeling if labeling is not None else base_env.current_labels
        self.q = None
        self.steps = 0
        self.terminated = True
        self.episode_trace = []

    # --- shape plumbing for learners --------------------------------------

    @property
    def n_automaton_states(self):
        return self.dfa.n_states

    @property
    def observation_dim(self):
        extra = 1 if self.mode == "enumerated" else self.dfa.n_states
        return self.base_env.observation_dim + extra

    @property
    def is_tabular(self):
        return getattr(self.base_env, "is_tabular", False)

    def __getattr__(self, name):
        if name in ("action_dim", "action_scale", "n_actions"):
            return getattr(self.base_env, name)
        raise AttributeError(name)

    def state_count(self, mode=None):
        if not self.is_tabular:
            raise NotTabularError("base environment has no finite state count")
        return product_state_count(self.base_env.num_states, self.dfa.n_states,
                                   mode or self.mode)

    # --- episode control ---------------------------------------------------

    def reset(self, rng=None):
        self._base_obs = self.base_env.reset(rng)
        self.q = self.dfa.initial
        if not self.delayed:
            # consume the initial state's label so automaton acceptance
            # tracks the full visited-state trace
            self.q = self.dfa.step(self.q, self.labeling())
        self.steps = 0
        self.terminated = self._task_terminal(self.q)
        self.episode_trace = []
        return ProductObservation(self._base_obs, self.q, self.dfa.n_states, self.mode)

    def _task_terminal(self, q):
        return q in self.dfa.accepting or q in self.dfa.errors

    def potential(self, q):
        return self.rank_table.potential[q] if self.rank_table is not None else 0.0

    def step(self, action):
        if self.terminated:
            raise StepAfterTermination("episode already finished")
        q_before = self.q
        if self.delayed:
            labels = self.labeling()
            q_next = self.dfa.step(q_before, labels)
            self._base_obs, base_reward, base_terminal = self.base_env.step(action)
        else:
            self._base_obs, base_reward, base_terminal = self.base_env.step(action)
            labels = self.labeling()
            q_next = self.dfa.step(q_before, labels)
        self.q = q_next
        self.steps += 1

        entered_accepting = q_next in self.dfa.accepting and q_before not in self.dfa.accepting
        raw = base_reward + (self.task.reward if entered_accepting else 0.0)
        task_terminal = self._task_terminal(q_next)
        truncated = (self.horizon is not None and self.steps >= self.horizon
                     and not task_terminal and not base_terminal)
        self.terminated = task_terminal or base_terminal or truncated

        if self.rank_table is not None:
            reward = raw + self.task.gamma * self.potential(q_next) - self.potential(q_before)
        else:
            reward = raw
        info = {
            "q": q_before,
            "q_next": q_next,
            "labels": labels,
            "raw_reward": raw,
            "task_terminal": task_terminal,
            "base_terminal": base_terminal,
            "truncated": truncated,
            "success": q_next in self.dfa.accepting,
        }
        self.episode_trace.append({
            "step": self.steps, "q": q_before, "q_next": q_next,
            "action_hash": _action_hash(action), "raw_reward": raw,
            "shaped_reward": reward, "terminated": self.terminated,
        })
        obs = ProductObservation(self._base_obs, q_next, self.dfa.n_states, self.mode)
        return obs, reward, self.terminated, info

    def write_trace(self, path):
        fields = ["step", "q", "q_next", "action_hash", "raw_reward",
                  "shaped_reward", "terminated"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(self.episode_trace)


def _action_hash(action):
    data = np.asarray(action, dtype=float).tobytes()
    return zlib.crc32(data)
