"""Exact enumeration of gridworld-automaton products, value iteration,
and policy evaluation.

This is the verification backbone: everything here is independent of the
learners.  Arithmetic is generic so value iteration can run on exact
fractions (slip-free grids, gamma 1) and certify argmax sets instead of
comparing floats.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ecrl.dfa import Dfa
from ecrl.envs.gridworld import MOVES, Gridworld
from ecrl.product import TaskSpec
from ecrl.ranking import RankTable


@dataclass
class TabularProductMdp:
    """Finite product of a gridworld with a task automaton.

    `transitions[s][a]` lists (probability, next_state, raw_reward,
    shaped_reward); terminal states have no outgoing transitions.
    """
    states: list
    index: dict
    n_actions: int
    transitions: list
    terminal: list
    success: list
    initial: int

    def state_of(self, pos, q):
        return self.index[(tuple(pos), q)]


def enumerate_product(grid: Gridworld, dfa: Dfa, task: TaskSpec,
                      rank_table: RankTable | None = None,
                      exact: bool = False) -> TabularProductMdp:
    cfg = grid.config
    if exact:
        slip = Fraction(cfg.slip).limit_denominator(10 ** 9)
        gamma = Fraction(task.gamma).limit_denominator(10 ** 9)
        reward = Fraction(task.reward).limit_denominator(10 ** 9)
        zero = Fraction(0)
    else:
        slip, gamma, reward, zero = cfg.slip, task.gamma, task.reward, 0.0
    if rank_table is None:
        potential = {q: zero for q in range(dfa.n_states)}
    elif exact:
        n, c = rank_table.n_categories, Fraction(rank_table.priority_constant)
        potential = {q: (c / n if q in dfa.errors else c / (n - rank_table.rank[q]))
                     for q in rank_table.rank}
    else:
        potential = rank_table.potential

    states = []
    index = {}
    for pos in grid.all_states():
        for q in range(dfa.n_states):
            index[(pos, q)] = len(states)
            states.append((pos, q))

    n_actions = grid.n_actions
    terminal = []
    success = []
    for pos, q in states:
        done = q in dfa.accepting or q in dfa.errors
        terminal.append(done)
        success.append(q in dfa.accepting)

    transitions = []
    for s, (pos, q) in enumerate(states):
        if terminal[s]:
            transitions.append([[] for _ in range(n_actions)])
            continue
        rows = []
        for action in range(n_actions):
            # slip replaces the chosen action by a uniform one
            probs = {}
            base = 1 - slip
            for actual in range(n_actions):
                p = (base if actual == action else zero) + slip / n_actions
                if p == 0:
                    continue
                nxt = grid.move(pos, actual)
                probs[nxt] = probs.get(nxt, zero) + p
            row = []
            for nxt, p in sorted(probs.items()):
                q_next = dfa.step(q, grid.labels_at(nxt))
                raw = reward if q_next in dfa.accepting else zero
                shaped = raw + gamma * potential[q_next] - potential[q]
                row.append((p, index[(nxt, q_next)], raw, shaped))
            rows.append(row)
        transitions.append(rows)

    q0 = dfa.step(dfa.initial, grid.labels_at(cfg.start))
    return TabularProductMdp(states=states, index=index, n_actions=n_actions,
                             transitions=transitions, terminal=terminal,
                             success=success, initial=index[(tuple(cfg.start), q0)])


def value_iteration(mdp: TabularProductMdp, gamma=None, reward: str = "raw",
                    tol: float = 1e-10, max_sweeps: int = 100000):
    """Optimal state values; terminal states are worth zero by definition.

    With fraction-valued transitions the sweep loop runs to an exact
    fixpoint, which gamma=1 reaches because no cycle has positive gain.
    """
    use_shaped = reward == "shaped"
    if reward not in ("raw", "shaped"):
        raise ValueError(f"unknown reward stream {reward!r}")
    first = next((row[0] for rows in mdp.transitions for row in rows if row), None)
    exact = first is not None and isinstance(first[0], Fraction)
    if gamma is None:
        gamma = Fraction(1) if exact else 1.0
    zero = Fraction(0) if exact else 0.0
    values = [zero] * len(mdp.states)
    for sweep in range(max_sweeps):
        delta = zero
        for s in range(len(mdp.states)):
            if mdp.terminal[s]:
                continue
            best = None
            for row in mdp.transitions[s]:
                total = zero
                for p, nxt, raw, shaped in row:
                    r = shaped if use_shaped else raw
                    total += p * (r + gamma * values[nxt])
                if best is None or total > best:
                    best = total
            change = abs(best - values[s])
            if change > delta:
                delta = change
            values[s] = best
        if (exact and delta == 0) or (not exact and delta < tol):
            return values
    raise RuntimeError("value iteration did not converge")


def greedy_actions(mdp: TabularProductMdp, values, gamma=None, reward: str = "raw"):
    """Argmax action sets per state (exact ties when values are fractions)."""
    use_shaped = reward == "shaped"
    exact = values and isinstance(values[mdp.initial], Fraction)
    if gamma is None:
        gamma = Fraction(1) if exact else 1.0
    out = []
    for s in range(len(mdp.states)):
        if mdp.terminal[s]:
            out.append(frozenset())
            continue
        scores = []
        for row in mdp.transitions[s]:
            total = Fraction(0) if exact else 0.0
            for p, nxt, raw, shaped in row:
                r = shaped if use_shaped else raw
                total += p * (r + gamma * values[nxt])
            scores.append(total)
        top = max(scores)
        if exact:
            out.append(frozenset(a for a, v in enumerate(scores) if v == top))
        else:
            out.append(frozenset(a for a, v in enumerate(scores) if v >= top - 1e-9))
    return out


def policy_success_vector(mdp: TabularProductMdp, policy, sweeps: int = 20000,
                          tol: float = 1e-13):
    """Probability of ending in an accepting state under `policy`, per state.

    `policy` maps a state index to an action.  Computed as the least
    fixpoint of the reachability equations, so states that loop forever
    correctly score zero.
    """
    n = len(mdp.states)
    x = np.zeros(n)
    for _ in range(sweeps):
        delta = 0.0
        for s in range(n):
            if mdp.terminal[s]:
                continue
            total = 0.0
            for p, nxt, raw, shaped in mdp.transitions[s][policy(s)]:
                total += float(p) * (1.0 if mdp.success[nxt] else x[nxt])
            delta = max(delta, abs(total - x[s]))
            x[s] = total
        if delta < tol:
            break
    return x


def optimal_success_vector(mdp: TabularProductMdp, sweeps: int = 20000,
                           tol: float = 1e-13):
    """Best achievable acceptance probability from every state."""
    n = len(mdp.states)
    x = np.zeros(n)
    for _ in range(sweeps):
        delta = 0.0
        for s in range(n):
            if mdp.terminal[s]:
                continue
            best = 0.0
            for row in mdp.transitions[s]:
                total = 0.0
                for p, nxt, raw, shaped in row:
                    total += float(p) * (1.0 if mdp.success[nxt] else x[nxt])
                best = max(best, total)
            delta = max(delta, abs(best - x[s]))
            x[s] = best
        if delta < tol:
            break
    return x


def rollout_success_rate(mdp: TabularProductMdp, policy, episodes: int,
                         rng: np.random.Generator, max_steps: int = 200):
    """Monte-Carlo acceptance frequency of `policy` from the initial state."""
    cumulative = {}
    for s in range(len(mdp.states)):
        if mdp.terminal[s]:
            continue
        row = mdp.transitions[s][policy(s)]
        edges = np.cumsum([float(p) for p, *_ in row])
        cumulative[s] = (edges, [nxt for _, nxt, *_ in row])
    wins = 0
    draws = iter(())
    for _ in range(episodes):
        s = mdp.initial
        for _ in range(max_steps):
            if mdp.terminal[s]:
                break
            edges, nxts = cumulative[s]
            u = next(draws, None)
            if u is None:
                draws = iter(rng.random(4096))
                u = next(draws)
            s = nxts[int(np.searchsorted(edges, u * edges[-1]))]
        wins += mdp.success[s]
    return wins / episodes
