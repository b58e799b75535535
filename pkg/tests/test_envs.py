import numpy as np
import pytest

from ecrl.envs import (Ball, CartpoleRegions, CartpoleRegionsConfig, Gridworld,
                       GridworldConfig, Waterworld, WaterworldConfig, random_map)


def lone_ball(position, velocity, color="r", **kw):
    return Waterworld(WaterworldConfig(balls=[Ball(position, velocity, color)], **kw))


class TestWaterworldPhysics:
    def test_zero_action_interior_is_uniform_motion(self):
        env = lone_ball((5.0, 5.0), (1.0, -0.5))
        env.reset()
        env.step(np.zeros(2))
        assert env.ball_pos[0] == pytest.approx([5.1, 4.95])
        env.step(np.zeros(2))
        assert env.ball_pos[0] == pytest.approx([5.2, 4.9])
        assert env.agent_pos == pytest.approx([10.0, 10.0])

    def test_wall_contact_negates_inbound_component(self):
        env = lone_ball((0.5, 10.0), (-2.0, 1.0))
        env.reset()
        env.step(np.zeros(2))
        assert env.ball_vel[0] == pytest.approx([2.0, 1.0])
        # raw next x = 0.3 overshoots the x=0.5 wall, mirrored to 0.7
        assert env.ball_pos[0] == pytest.approx([0.7, 10.1])

    def test_bounce_conserves_speed(self):
        env = lone_ball((19.4, 0.6), (1.9, -1.7))
        env.reset()
        speed = np.linalg.norm(env.ball_vel[0])
        for _ in range(200):
            env.step(np.zeros(2))
            assert np.linalg.norm(env.ball_vel[0]) == pytest.approx(speed)

    def test_everything_stays_inside_the_arena(self):
        rng = np.random.default_rng(0)
        cfg = random_map(colors=("r", "g"), balls_per_color=4, rng=rng)
        env = Waterworld(cfg)
        env.reset()
        for _ in range(500):
            env.step(rng.uniform(-1, 1, size=2))
            assert np.all(env.ball_pos >= 0.5) and np.all(env.ball_pos <= 19.5)
            assert np.all(env.agent_pos >= 0.5) and np.all(env.agent_pos <= 19.5)

    def test_speed_cap_holds_under_constant_push(self):
        env = lone_ball((5.0, 5.0), (0.0, 0.0))
        env.reset()
        for _ in range(500):
            env.step(np.array([1.0, 0.0]))
            assert np.linalg.norm(env.agent_vel) <= 3.5 + 1e-12
        assert np.linalg.norm(env.agent_vel) == pytest.approx(3.5)

    def test_acceleration_magnitude_is_capped(self):
        env = lone_ball((5.0, 5.0), (0.0, 0.0))
        env.reset()
        env.step(np.array([30.0, 40.0]))  # renormalized to unit length
        assert env.agent_vel == pytest.approx([0.06, 0.08])

    def test_velocity_ramps_by_dt(self):
        env = lone_ball((5.0, 5.0), (0.0, 0.0))
        env.reset()
        env.step(np.array([1.0, 0.0]))
        assert env.agent_vel == pytest.approx([0.1, 0.0])


class TestWaterworldLabels:
    def place(self, agent, ball):
        env = lone_ball(ball, (0.0, 0.0))
        env.reset()
        env.agent_pos = np.array(agent, dtype=float)
        return env

    def test_coincident_centers_touch(self):
        assert self.place((5.0, 5.0), (5.0, 5.0)).current_labels() == {"r"}

    def test_distance_exactly_one_touches(self):
        assert self.place((5.0, 5.0), (6.0, 5.0)).current_labels() == {"r"}

    def test_distance_just_over_one_does_not(self):
        assert self.place((5.0, 5.0), (6.01, 5.0)).current_labels() == frozenset()

    def test_multiple_colors_reported_together(self):
        cfg = WaterworldConfig(balls=[Ball((5.0, 5.0), (0, 0), "r"),
                                      Ball((5.5, 5.0), (0, 0), "g")])
        env = Waterworld(cfg)
        env.reset()
        env.agent_pos = np.array([5.2, 5.0])
        assert env.current_labels() == {"r", "g"}

    def test_observation_dimension(self):
        cfg = random_map(colors=("r", "g", "b"), balls_per_color=3,
                         rng=np.random.default_rng(1))
        env = Waterworld(cfg)
        assert env.reset().shape == (4 + 4 * 9,)
        assert env.observation_dim == 40


class TestRandomMap:
    def test_no_ball_starts_in_contact(self):
        for seed in range(10):
            cfg = random_map(colors=("r", "g", "b"), balls_per_color=3,
                             rng=np.random.default_rng(seed))
            env = Waterworld(cfg)
            env.reset()
            assert env.current_labels() == frozenset()

    def test_velocities_within_range(self):
        cfg = random_map(colors=("r",), balls_per_color=50,
                         rng=np.random.default_rng(2))
        assert all(abs(v) <= 2.0 for b in cfg.balls for v in b.velocity)

    def test_config_json_round_trip(self):
        cfg = random_map(colors=("r", "g"), balls_per_color=2,
                         rng=np.random.default_rng(3))
        back = WaterworldConfig.from_json(cfg.to_json())
        assert back == cfg


class TestCartpoleDynamics:
    def test_exact_upright_start_is_stationary(self):
        env = CartpoleRegions(CartpoleRegionsConfig())
        env.reset()
        for _ in range(100):
            obs, reward, terminated = env.step(np.array([0.0]))
            assert not terminated
        assert obs == pytest.approx(np.zeros(4))

    def test_constant_push_moves_cart_monotonically(self):
        env = CartpoleRegions(CartpoleRegionsConfig())
        env.reset()
        last = 0.0
        terminated = False
        while not terminated:
            obs, _, terminated = env.step(np.array([10.0]))
            assert obs[0] > last
            last = obs[0]
        # the pole tips against the push direction and falls first
        assert abs(obs[2]) > 0.21

    def test_track_exit_terminates_with_penalty(self):
        env = CartpoleRegions(CartpoleRegionsConfig())
        env.reset()
        env.state = np.array([3.49, 5.0, 0.0, 0.0])
        obs, reward, terminated = env.step(np.array([0.0]))
        assert terminated and reward == -10.0
        assert abs(obs[0]) > 3.5

    def test_pole_fall_terminates_with_penalty(self):
        env = CartpoleRegions(CartpoleRegionsConfig())
        env.reset()
        env.state = np.array([0.0, 0.0, 0.205, 2.0])
        _, reward, terminated = env.step(np.array([0.0]))
        assert terminated and reward == -10.0

    def test_force_is_clipped_to_magnitude(self):
        a = CartpoleRegions(CartpoleRegionsConfig())
        b = CartpoleRegions(CartpoleRegionsConfig())
        a.reset(), b.reset()
        a.step(np.array([100.0]))
        b.step(np.array([10.0]))
        assert a.state == pytest.approx(b.state)


class TestCartpoleRegionLabels:
    def test_three_regions_sit_centered(self):
        cfg = CartpoleRegionsConfig(n_regions=3)
        assert cfg.region_interval(1) == (-1.5, -0.5)
        assert cfg.region_interval(3) == (0.5, 1.5)

    def test_boundary_belongs_to_lower_region(self):
        env = CartpoleRegions(CartpoleRegionsConfig(n_regions=3))
        env.reset()
        for x, expected in [(-1.5, frozenset()), (-0.5, {"g1"}), (0.5, {"g2"}),
                            (1.5, {"g3"}), (1.6, frozenset()), (0.0, {"g2"})]:
            env.state[0] = x
            assert env.current_labels() == expected, x

    def test_seven_regions_tile_the_whole_track(self):
        env = CartpoleRegions(CartpoleRegionsConfig(n_regions=7))
        env.reset()
        for x in np.linspace(-3.499, 3.5, 701):
            env.state[0] = x
            assert len(env.current_labels()) == 1

    def test_at_most_one_region_holds(self):
        env = CartpoleRegions(CartpoleRegionsConfig(n_regions=5))
        env.reset()
        for x in np.linspace(-3.5, 3.5, 1401):
            env.state[0] = x
            assert len(env.current_labels()) <= 1

    def test_region_overflow_rejected(self):
        with pytest.raises(ValueError):
            CartpoleRegionsConfig(n_regions=8)


def tiny_grid():
    cells = {(0, 0): "r", (2, 0): "g", (1, 2): "b"}
    return Gridworld(GridworldConfig(width=3, height=3, cells=cells, start=(1, 1)))


class TestGridworld:
    def test_moves_and_bumps(self):
        env = tiny_grid()
        env.reset()
        assert env.step(2)[0] == (0, 1)   # left
        assert env.step(2)[0] == (0, 1)   # bump into the wall: stay
        assert env.step(1)[0] == (0, 0)   # down
        assert env.step(3)[0] == (1, 0)   # right

    def test_labels_only_on_colored_cells(self):
        env = tiny_grid()
        env.reset()
        assert env.current_labels() == frozenset()
        env.pos = (2, 0)
        assert env.current_labels() == {"g"}
        assert env.labels_at((0, 0)) == {"r"}

    def test_propositions_sorted_unique(self):
        assert tiny_grid().propositions == ("b", "g", "r")

    def test_deterministic_without_slip(self):
        env = tiny_grid()
        env.reset(np.random.default_rng(0))
        trail = [env.step(a)[0] for a in [0, 3, 1, 1, 2]]
        env.reset(np.random.default_rng(99))
        assert trail == [env.step(a)[0] for a in [0, 3, 1, 1, 2]]

    def test_full_slip_ignores_chosen_action(self):
        cfg = GridworldConfig(width=5, height=5, cells={}, start=(2, 2), slip=1.0)
        env = Gridworld(cfg)
        env.reset(np.random.default_rng(4))
        seen = set()
        for _ in range(100):
            env.pos = (2, 2)
            seen.add(env.step(0)[0])
        assert seen == {(2, 3), (2, 1), (1, 2), (3, 2)}

    def test_out_of_bounds_config_rejected(self):
        with pytest.raises(ValueError):
            GridworldConfig(width=2, height=2, cells={(5, 0): "r"}, start=(0, 0))

    def test_json_round_trip(self):
        cfg = tiny_grid().config
        assert GridworldConfig.from_json(cfg.to_json()) == cfg

    def test_state_enumeration(self):
        env = tiny_grid()
        assert env.num_states == 9
        assert len(env.all_states()) == 9
