"""Small colored-cell gridworld, the fully enumerable substrate for
exact cross-checks of the whole pipeline.

Observations are plain (x, y) tuples.  Moves are deterministic unless a
slip probability is set, in which case the chosen action is replaced by
a uniformly random one.  Walking into a wall leaves the agent in place.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))  # up, down, left, right


@dataclass
class GridworldConfig:
    width: int
    height: int
    cells: dict          # (x, y) -> proposition
    start: tuple
    slip: float = 0.0

    def __post_init__(self):
        for (x, y), prop in self.cells.items():
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"colored cell {(x, y)} out of bounds")
        sx, sy = self.start
        if not (0 <= sx < self.width and 0 <= sy < self.height):
            raise ValueError("start out of bounds")
        if not 0.0 <= self.slip <= 1.0:
            raise ValueError("slip must be a probability")

    def to_json(self):
        return {"width": self.width, "height": self.height,
                "cells": [[x, y, prop] for (x, y), prop in sorted(self.cells.items())],
                "start": list(self.start), "slip": self.slip}

    @classmethod
    def from_json(cls, data):
        cells = {(x, y): prop for x, y, prop in data["cells"]}
        return cls(width=data["width"], height=data["height"], cells=cells,
                   start=tuple(data["start"]), slip=data.get("slip", 0.0))


class Gridworld:
    is_tabular = True

    def __init__(self, config: GridworldConfig):
        self.config = config
        self.propositions = tuple(sorted(set(config.cells.values())))
        self.n_actions = len(MOVES)
        self.num_states = config.width * config.height
        self.pos = None
        self.rng = None

    def reset(self, rng=None):
        self.pos = tuple(self.config.start)
        self.rng = rng
        return self.pos

    def step(self, action):
        action = int(action)
        if self.rng is not None and self.config.slip > 0.0:
            if self.rng.random() < self.config.slip:
                action = int(self.rng.integers(self.n_actions))
        self.pos = self.move(self.pos, action)
        return self.pos, 0.0, False

    def move(self, pos, action):
        """Deterministic successor; exposed so oracles can enumerate."""
        dx, dy = MOVES[action]
        x, y = pos[0] + dx, pos[1] + dy
        if 0 <= x < self.config.width and 0 <= y < self.config.height:
            return (x, y)
        return tuple(pos)

    def current_labels(self):
        return self.labels_at(self.pos)

    def labels_at(self, pos):
        prop = self.config.cells.get(tuple(pos))
        return frozenset() if prop is None else frozenset({prop})

    def all_states(self):
        return [(x, y) for x in range(self.config.width)
                for y in range(self.config.height)]
