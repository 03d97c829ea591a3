"""Tests for the step/reset environment."""

import math

import numpy as np
import pytest

from diabolo.exceptions import ConfigError, InputError, NotResetError, UnknownPatternError
from diabolo.factories import FlyingStateFactory
from diabolo.models import ContactStatus, StickPair
from diabolo.services.environment import DiaboloEnv, EnvConfig
from diabolo.services.geometry import bottom_point, build_spheroid
from diabolo.services.player import rollout_sticks


@pytest.fixture
def env(params):
    return DiaboloEnv(EnvConfig(params=params, episode_horizon=50))


class TestEnvConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"action_mode": "torque"},
            {"action_bounds": 0.0},
            {"episode_horizon": 0},
            {"episode_horizon": 2.5},
            {"episode_horizon": True},
            {"initial_noise": -0.1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            EnvConfig(**kwargs)

    def test_unknown_template(self):
        with pytest.raises(UnknownPatternError):
            EnvConfig(template="juggle")


class TestReset:
    """Test starting episodes."""

    def test_hang(self, env, params):
        obs = env.reset(seed=0)

        expected = bottom_point(build_spheroid(env.cfg.sticks_init, params.l_string))
        np.testing.assert_allclose(obs.position, expected)
        np.testing.assert_array_equal(obs.velocity, [0, 0, 0])
        assert obs.status is ContactStatus.ON_STRING
        assert obs.time_fraction == 0.0
        assert not env.done

    def test_same_seed_same_start(self, params):
        env = DiaboloEnv(EnvConfig(params=params, initial_noise=0.01))

        first = env.reset(seed=3).position
        second = env.reset(seed=3).position
        other = env.reset(seed=4).position

        np.testing.assert_array_equal(first, second)
        assert not np.array_equal(first, other)

    def test_explicit_initial_state(self, params):
        initial = FlyingStateFactory()
        env = DiaboloEnv(EnvConfig(params=params, initial=initial))

        obs = env.reset()

        assert obs.status is ContactStatus.FLYING
        np.testing.assert_array_equal(obs.position, initial.position)

    def test_sticks_too_far_apart(self, params):
        sticks = StickPair(left=(0, 1.0, 1.2), right=(0, -1.0, 1.2))
        env = DiaboloEnv(EnvConfig(params=params, sticks_init=sticks, initial=FlyingStateFactory()))

        with pytest.raises(ConfigError, match="apart"):
            env.reset()

    def test_reset_clears_episode(self, env):
        env.reset()
        env.step(np.zeros(6))

        env.reset()

        assert len(env.recording()) == 1


class TestStep:
    """Test stepping with stick actions."""

    def test_before_reset(self, env):
        with pytest.raises(NotResetError):
            env.step(np.zeros(6))

    def test_zero_action_keeps_sticks(self, env):
        env.reset()

        obs, info, done = env.step(np.zeros(6))

        np.testing.assert_array_equal(obs.sticks.as_array(), env.cfg.sticks_init.as_array())
        assert not info.action_clamped
        assert info.reward is None
        assert not done
        assert obs.time_fraction == pytest.approx(1 / 50)

    def test_velocity_action(self, env, params):
        env.reset()

        obs, _, _ = env.step([0.5, 0, 0, 0, 0, 0])

        assert obs.sticks.left[0] == pytest.approx(0.5 * params.dt)

    def test_velocity_action_clamped(self, env, params):
        env.reset()

        obs, info, _ = env.step([10.0, 0, 0, 0, 0, -10.0])

        assert info.action_clamped
        assert obs.sticks.left[0] == pytest.approx(1.5 * params.dt)
        assert obs.sticks.right[2] == pytest.approx(1.2 - 1.5 * params.dt)

    def test_absolute_action_clamped(self, params):
        env = DiaboloEnv(EnvConfig(params=params, action_mode="absolute", action_bounds=0.1))
        env.reset()

        obs, info, _ = env.step([0.5, 0.3, 1.2, 0, -0.3, 1.2])

        assert info.action_clamped
        assert obs.sticks.left[0] == pytest.approx(0.1)

    def test_overstretching_action_is_repaired(self, params):
        env = DiaboloEnv(EnvConfig(params=params, action_mode="absolute"))
        env.reset()

        obs, info, _ = env.step([0, 0.9, 1.2, 0, -0.9, 1.2])

        assert info.action_clamped
        assert obs.sticks.separation < params.l_string

    def test_non_finite_action(self, env):
        env.reset()

        with pytest.raises(InputError):
            env.step([math.nan, 0, 0, 0, 0, 0])

    def test_done_at_horizon(self, params):
        env = DiaboloEnv(EnvConfig(params=params, episode_horizon=3))
        env.reset()

        dones = [env.step(np.zeros(6))[2] for _ in range(3)]

        assert dones == [False, False, True]
        with pytest.raises(NotResetError, match="over"):
            env.step(np.zeros(6))

    def test_reward_fn(self, params):
        env = DiaboloEnv(EnvConfig(params=params), reward_fn=lambda state, sticks, diagnostics: -state.position[2])
        env.reset()

        obs, info, _ = env.step(np.zeros(6))

        assert info.reward == -obs.position[2]

    def test_observation_vector(self, env):
        obs = env.reset()

        vector = obs.as_array()

        assert vector.shape == (15,)
        np.testing.assert_array_equal(vector[6:8], [0.0, 0.0])


class TestRecording:
    """Test recording episodes as traces."""

    def test_before_reset(self, env):
        with pytest.raises(NotResetError):
            env.recording()

    def test_matches_rollout(self, env, params):
        """Test an episode replays exactly through rollout_sticks."""
        env.reset()
        initial = env.state
        rng = np.random.default_rng(6)
        for _ in range(30):
            env.step(rng.uniform(-1.0, 1.0, 6))

        trace = env.recording()
        poses = [trace.sticks(i) for i in range(len(trace))]
        replayed = rollout_sticks(initial, poses, params)

        assert len(trace) == 31
        np.testing.assert_array_equal(np.array([s.position for s in replayed]), trace.diabolo)
        assert trace.meta.motion_class == "hang"
        assert trace.meta.sample_rate == pytest.approx(1.0 / params.dt)
