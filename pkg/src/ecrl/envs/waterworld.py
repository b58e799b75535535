"""Square arena of bouncing colored balls and one steerable agent.

Balls move at constant velocity and reflect off the walls; the agent
accelerates in any direction up to a speed cap and is clamped inside the
arena.  A proposition is true while the agent touches any ball of that
color.  The base reward is always zero: reward comes entirely from the
task layered on top.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Ball:
    position: tuple
    velocity: tuple
    color: str

    def to_json(self):
        return {"position": list(self.position), "velocity": list(self.velocity),
                "color": self.color}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(data["position"]), tuple(data["velocity"]), data["color"])


@dataclass
class WaterworldConfig:
    balls: list
    boundary: float = 20.0
    ball_radius: float = 0.5
    agent_radius: float = 0.5
    agent_max_speed: float = 3.5
    accel_limit: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        half = self.boundary
        for ball in self.balls:
            x, y = ball.position
            if not (0.0 <= x <= half and 0.0 <= y <= half):
                raise ValueError(f"ball at {ball.position} outside the arena")
            if any(abs(v) > 2.0 for v in ball.velocity):
                raise ValueError(f"ball velocity {ball.velocity} out of range")

    def to_json(self):
        return {"boundary": self.boundary, "ballRadius": self.ball_radius,
                "agentRadius": self.agent_radius, "agentMaxSpeed": self.agent_max_speed,
                "accelLimit": self.accel_limit, "dt": self.dt,
                "balls": [b.to_json() for b in self.balls]}

    @classmethod
    def from_json(cls, data):
        return cls(balls=[Ball.from_json(b) for b in data["balls"]],
                   boundary=data.get("boundary", 20.0),
                   ball_radius=data.get("ballRadius", 0.5),
                   agent_radius=data.get("agentRadius", 0.5),
                   agent_max_speed=data.get("agentMaxSpeed", 3.5),
                   accel_limit=data.get("accelLimit", 1.0),
                   dt=data.get("dt", 0.1))


def random_map(colors, balls_per_color, rng, boundary=20.0, clearance=1.5,
               **config_kwargs):
    """Scatter balls uniformly, rejecting starts that touch the agent.

    The agent starts at the arena center; positions closer than
    `clearance` to it are redrawn so no proposition holds at step 0.
    """
    radius = config_kwargs.get("ball_radius", 0.5)
    center = np.array([boundary / 2.0, boundary / 2.0])
    balls = []
    for color in colors:
        for _ in range(balls_per_color):
            while True:
                pos = rng.uniform(radius, boundary - radius, size=2)
                if np.linalg.norm(pos - center) > clearance:
                    break
            vel = rng.uniform(-2.0, 2.0, size=2)
            balls.append(Ball(tuple(pos), tuple(vel), color))
    return WaterworldConfig(balls=balls, boundary=boundary, **config_kwargs)


class Waterworld:
    is_tabular = False

    def __init__(self, config: WaterworldConfig):
        self.config = config
        self.propositions = tuple(dict.fromkeys(b.color for b in config.balls))
        self.action_dim = 2
        self.action_scale = config.accel_limit
        self.observation_dim = 4 + 4 * len(config.balls)
        self.agent_pos = None
        self.agent_vel = None
        self.ball_pos = None
        self.ball_vel = None

    def reset(self, rng=None):
        side = self.config.boundary
        self.agent_pos = np.array([side / 2.0, side / 2.0])
        self.agent_vel = np.zeros(2)
        self.ball_pos = np.array([b.position for b in self.config.balls], dtype=float)
        self.ball_vel = np.array([b.velocity for b in self.config.balls], dtype=float)
        return self.observation()

    def step(self, action):
        cfg = self.config
        accel = np.asarray(action, dtype=float)
        size = np.linalg.norm(accel)
        if size > cfg.accel_limit:
            accel = accel * (cfg.accel_limit / size)
        self.agent_vel = self.agent_vel + accel * cfg.dt
        speed = np.linalg.norm(self.agent_vel)
        if speed > cfg.agent_max_speed:
            self.agent_vel *= cfg.agent_max_speed / speed
        self.agent_pos = self.agent_pos + self.agent_vel * cfg.dt
        lo, hi = cfg.agent_radius, cfg.boundary - cfg.agent_radius
        self.agent_pos = np.clip(self.agent_pos, lo, hi)

        self.ball_pos = self.ball_pos + self.ball_vel * cfg.dt
        lo, hi = cfg.ball_radius, cfg.boundary - cfg.ball_radius
        for bound, side in ((lo, -1.0), (hi, 1.0)):
            crossed = (self.ball_pos - bound) * side > 0.0
            # mirror the overshoot back inside and reverse that component
            self.ball_pos = np.where(crossed, 2.0 * bound - self.ball_pos, self.ball_pos)
            self.ball_vel = np.where(crossed, -self.ball_vel, self.ball_vel)
        return self.observation(), 0.0, False

    def current_labels(self):
        touch = self.config.agent_radius + self.config.ball_radius
        dist = np.linalg.norm(self.ball_pos - self.agent_pos, axis=1)
        held = set()
        for ball, d in zip(self.config.balls, dist):
            if d <= touch:
                held.add(ball.color)
        return frozenset(held)

    def observation(self):
        cfg = self.config
        rel = (self.ball_pos - self.agent_pos) / cfg.boundary
        vel = self.ball_vel / 2.0
        return np.concatenate([self.agent_pos / cfg.boundary,
                               self.agent_vel / cfg.agent_max_speed,
                               np.concatenate([rel, vel], axis=1).ravel()])


def compass_actions(scale: float = 1.0):
    """Nine accelerations: coast plus the eight compass directions."""
    out = [np.zeros(2)]
    for k in range(8):
        angle = k * np.pi / 4.0
        out.append(scale * np.array([np.cos(angle), np.sin(angle)]))
    return np.array(out)


class DiscreteActions:
    """Expose a continuous-control environment through a finite action table."""

    def __init__(self, env, actions):
        self.env = env
        self.actions = np.asarray(actions, dtype=float)
        self.n_actions = len(self.actions)
        self.propositions = env.propositions
        self.observation_dim = env.observation_dim
        self.is_tabular = False

    def reset(self, rng=None):
        return self.env.reset(rng)

    def step(self, index):
        return self.env.step(self.actions[int(index)])

    def current_labels(self):
        return self.env.current_labels()
