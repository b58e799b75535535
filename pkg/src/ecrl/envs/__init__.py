"""Benchmark environments.

Every environment follows the same small protocol consumed by the
product wrapper:

- ``reset(rng=None) -> obs`` starts an episode
- ``step(action) -> (obs, reward, terminated)`` advances one timestep
- ``current_labels() -> frozenset[str]`` reads the propositions true now
- ``propositions`` lists every label the environment can emit

Continuous environments expose ``observation_dim``, ``action_dim`` and
``action_scale``; the tabular gridworld exposes ``num_states`` and
hashable observations instead.
"""
from ecrl.envs.cartpole import CartpoleRegions, CartpoleRegionsConfig
from ecrl.envs.gridworld import Gridworld, GridworldConfig
from ecrl.envs.waterworld import (Ball, DiscreteActions, Waterworld,
                                  WaterworldConfig, compass_actions, random_map)

__all__ = [
    "Ball",
    "CartpoleRegions",
    "CartpoleRegionsConfig",
    "DiscreteActions",
    "Gridworld",
    "GridworldConfig",
    "Waterworld",
    "WaterworldConfig",
    "compass_actions",
    "random_map",
]
