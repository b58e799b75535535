"""Pole balancing on a wide track striped with labeled regions.

Standard cart-pole physics on a 7 m track.  A band of unit-width colored
regions sits centered on the track; the proposition for a region holds
while the cart center is inside it.  Falling past the angle limit or
running off the track ends the episode with a fixed penalty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class CartpoleRegionsConfig:
    n_regions: int = 3
    region_width: float = 1.0
    track_half_width: float = 3.5
    angle_limit: float = 0.21
    termination_penalty: float = -10.0
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.25
    gravity: float = 9.8
    force_mag: float = 10.0
    dt: float = 0.02

    def __post_init__(self):
        span = self.n_regions * self.region_width
        if span > 2.0 * self.track_half_width:
            raise ValueError("colored regions wider than the track")

    def region_interval(self, index):
        """Half-open (left, right] interval of region `index` (1-based)."""
        left_edge = -self.n_regions * self.region_width / 2.0
        a = left_edge + (index - 1) * self.region_width
        return a, a + self.region_width

    def to_json(self):
        return {"nRegions": self.n_regions, "regionWidth": self.region_width,
                "trackHalfWidth": self.track_half_width, "angleLimit": self.angle_limit,
                "terminationPenalty": self.termination_penalty, "dt": self.dt}

    @classmethod
    def from_json(cls, data):
        return cls(n_regions=data.get("nRegions", 3),
                   region_width=data.get("regionWidth", 1.0),
                   track_half_width=data.get("trackHalfWidth", 3.5),
                   angle_limit=data.get("angleLimit", 0.21),
                   termination_penalty=data.get("terminationPenalty", -10.0),
                   dt=data.get("dt", 0.02))


class CartpoleRegions:
    is_tabular = False

    def __init__(self, config: CartpoleRegionsConfig):
        self.config = config
        self.propositions = tuple(f"g{i}" for i in range(1, config.n_regions + 1))
        self.observation_dim = 4
        self.action_dim = 1
        self.action_scale = config.force_mag
        self.state = None

    def reset(self, rng=None):
        # exact upright start: the equilibrium only drifts once pushed
        self.state = np.zeros(4)
        return self.observation()

    def step(self, action):
        cfg = self.config
        force = float(np.clip(np.asarray(action, dtype=float).reshape(-1)[0],
                              -cfg.force_mag, cfg.force_mag))
        x, x_dot, theta, theta_dot = self.state
        total_mass = cfg.cart_mass + cfg.pole_mass
        pole_ml = cfg.pole_mass * cfg.pole_half_length
        sin, cos = math.sin(theta), math.cos(theta)
        temp = (force + pole_ml * theta_dot ** 2 * sin) / total_mass
        theta_acc = (cfg.gravity * sin - cos * temp) / (
            cfg.pole_half_length * (4.0 / 3.0 - cfg.pole_mass * cos ** 2 / total_mass))
        x_acc = temp - pole_ml * theta_acc * cos / total_mass
        # velocity-first integration so a constant push moves the cart
        # immediately instead of one step late
        x_dot += cfg.dt * x_acc
        x += cfg.dt * x_dot
        theta_dot += cfg.dt * theta_acc
        theta += cfg.dt * theta_dot
        self.state = np.array([x, x_dot, theta, theta_dot])
        terminated = abs(x) > cfg.track_half_width or abs(theta) > cfg.angle_limit
        reward = cfg.termination_penalty if terminated else 0.0
        return self.observation(), reward, terminated

    def current_labels(self):
        x = self.state[0]
        cfg = self.config
        left_edge = -cfg.n_regions * cfg.region_width / 2.0
        offset = x - left_edge
        if offset <= 0.0 or offset > cfg.n_regions * cfg.region_width:
            return frozenset()
        index = math.ceil(offset / cfg.region_width)
        return frozenset({f"g{index}"})

    def observation(self):
        return self.state.copy()
