"""Off-policy learners: tabular Q-learning, a discrete-action Q network,
and a twin-critic actor-critic for continuous control.

All function approximation runs on the hand-rolled networks in
:mod:`ecrl.nets`, so every gradient step stays auditable.  Each learner
exposes ``update(batch)`` returning the per-sample TD errors (the
prioritized baseline needs them).
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from ecrl.nets import Mlp, MomentumSgd


def new_q_table(n_actions: int):
    """Tabular action-value store: hashable state key -> value row."""
    return defaultdict(lambda: np.zeros(n_actions))


def q_learning_update(table, experience, learning_rate: float, gamma: float):
    """One Q-learning backup in place; returns the table for chaining."""
    row = table[experience.state]
    if experience.terminated:
        target = experience.reward
    else:
        target = experience.reward + gamma * np.max(table[experience.next_state])
    row[experience.action] += learning_rate * (target - row[experience.action])
    return table


def stack_batch(batch):
    states = np.stack([np.asarray(e.state, dtype=float) for e in batch])
    actions = np.asarray([e.action for e in batch])
    rewards = np.asarray([e.reward for e in batch], dtype=float)
    next_states = np.stack([np.asarray(e.next_state, dtype=float) for e in batch])
    live = np.asarray([0.0 if e.terminated else 1.0 for e in batch])
    return states, actions, rewards, next_states, live


class TabularQAgent:
    """Dictionary-backed Q-learning over hashable observation keys."""

    def __init__(self, n_actions: int, learning_rate: float, gamma: float,
                 rng: np.random.Generator):
        self.n_actions = n_actions
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.rng = rng
        self.table = new_q_table(n_actions)

    def act(self, state, epsilon: float = 0.0):
        if epsilon > 0.0 and self.rng.random() < epsilon:
            return int(self.rng.integers(self.n_actions))
        return self.greedy(state)

    def greedy(self, state):
        row = self.table[state]
        best = np.flatnonzero(row == row.max())
        return int(best[0])

    def update(self, batch, weights=None):
        errors = np.empty(len(batch))
        for i, e in enumerate(batch):
            before = self.table[e.state][e.action]
            q_learning_update(self.table, e, self.learning_rate, self.gamma)
            after = self.table[e.state][e.action]
            # invert the lr scaling to recover the raw TD error
            errors[i] = (after - before) / self.learning_rate if self.learning_rate else 0.0
        return errors


class DqnAgent:
    """Q network with a polyak-averaged target copy and epsilon-greedy acting."""

    def __init__(self, obs_dim: int, n_actions: int, rng: np.random.Generator,
                 hidden=(64, 64), learning_rate: float = 3e-4, gamma: float = 0.99,
                 polyak_tau: float = 0.005):
        self.n_actions = n_actions
        self.gamma = gamma
        self.polyak_tau = polyak_tau
        self.rng = rng
        sizes = [obs_dim, *hidden, n_actions]
        self.online = Mlp(sizes, rng)
        self.target = self.online.clone()
        self.optimizer = MomentumSgd(self.online, learning_rate)

    def act(self, state, epsilon: float = 0.0):
        if epsilon > 0.0 and self.rng.random() < epsilon:
            return int(self.rng.integers(self.n_actions))
        return self.greedy(state)

    def greedy(self, state):
        values = self.online.forward(np.asarray(state, dtype=float))
        best = np.flatnonzero(values == values.max())
        return int(best[0])

    def update(self, batch, weights=None):
        states, actions, rewards, next_states, live = stack_batch(batch)
        n = len(batch)
        next_best = self.target.forward(next_states).max(axis=1)
        targets = rewards + self.gamma * live * next_best
        values = self.online.forward(states)
        picked = values[np.arange(n), actions]
        td = targets - picked
        scale = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        # d/dq of mean(w * (target - q)^2)
        upstream = np.zeros_like(values)
        upstream[np.arange(n), actions] = -2.0 * scale * td / n
        grads, _ = self.online.backward(upstream)
        self.optimizer.step(grads)
        self.target.polyak_from(self.online, self.polyak_tau)
        return td


class Td3Agent:
    """Deterministic actor with clipped-noise twin-critic targets.

    The critics regress on the minimum of the two target critics
    evaluated at smoothed target-actor actions; the actor follows the
    first critic's gradient on a fixed delay.
    """

    def __init__(self, obs_dim: int, act_dim: int, action_scale: float,
                 rng: np.random.Generator, hidden=(64, 64),
                 learning_rate: float = 3e-4, gamma: float = 0.99,
                 polyak_tau: float = 0.005, policy_delay: int = 2,
                 target_noise_std: float = 0.2, target_noise_clip: float = 0.5):
        self.act_dim = act_dim
        self.action_scale = float(action_scale)
        self.gamma = gamma
        self.polyak_tau = polyak_tau
        self.policy_delay = policy_delay
        self.target_noise_std = target_noise_std
        self.target_noise_clip = target_noise_clip
        self.rng = rng
        self.actor = Mlp([obs_dim, *hidden, act_dim], rng, output="tanh",
                         output_scale=self.action_scale)
        self.critic_1 = Mlp([obs_dim + act_dim, *hidden, 1], rng)
        self.critic_2 = Mlp([obs_dim + act_dim, *hidden, 1], rng)
        self.actor_target = self.actor.clone()
        self.critic_1_target = self.critic_1.clone()
        self.critic_2_target = self.critic_2.clone()
        self.actor_opt = MomentumSgd(self.actor, learning_rate)
        self.critic_1_opt = MomentumSgd(self.critic_1, learning_rate)
        self.critic_2_opt = MomentumSgd(self.critic_2, learning_rate)
        self.updates_done = 0

    def act(self, state, noise_std: float = 0.0):
        action = self.actor.forward(np.asarray(state, dtype=float))
        if noise_std > 0.0:
            action = action + self.rng.normal(scale=noise_std * self.action_scale,
                                              size=self.act_dim)
        return np.clip(action, -self.action_scale, self.action_scale)

    def greedy(self, state):
        return self.act(state, noise_std=0.0)

    def _critic_targets(self, rewards, next_states, live):
        noise = self.rng.normal(scale=self.target_noise_std, size=(len(next_states), self.act_dim))
        noise = np.clip(noise, -self.target_noise_clip, self.target_noise_clip)
        next_actions = self.actor_target.forward(next_states) + noise * self.action_scale
        next_actions = np.clip(next_actions, -self.action_scale, self.action_scale)
        pair = np.concatenate([next_states, next_actions], axis=1)
        q1 = self.critic_1_target.forward(pair)[:, 0]
        q2 = self.critic_2_target.forward(pair)[:, 0]
        return rewards + self.gamma * live * np.minimum(q1, q2)

    def update(self, batch, weights=None):
        states, actions, rewards, next_states, live = stack_batch(batch)
        n = len(batch)
        actions = actions.reshape(n, self.act_dim)
        targets = self._critic_targets(rewards, next_states, live)
        scale = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        pair = np.concatenate([states, actions], axis=1)
        td = None
        for critic, opt in ((self.critic_1, self.critic_1_opt),
                            (self.critic_2, self.critic_2_opt)):
            q = critic.forward(pair)[:, 0]
            err = targets - q
            if td is None:
                td = err
            upstream = (-2.0 * scale * err / n)[:, None]
            grads, _ = critic.backward(upstream)
            opt.step(grads)

        self.updates_done += 1
        if self.updates_done % self.policy_delay == 0:
            proposed = self.actor.forward(states)
            pair = np.concatenate([states, proposed], axis=1)
            self.critic_1.forward(pair)
            # maximize q: upstream -1/n through the critic, take the
            # action slice of its input gradient into the actor
            _, input_grad = self.critic_1.backward(np.full((n, 1), -1.0 / n))
            action_grad = input_grad[:, states.shape[1]:]
            actor_grads, _ = self.actor.backward(action_grad)
            self.actor_opt.step(actor_grads)
            self.actor_target.polyak_from(self.actor, self.polyak_tau)
            self.critic_1_target.polyak_from(self.critic_1, self.polyak_tau)
            self.critic_2_target.polyak_from(self.critic_2, self.polyak_tau)
        return td
