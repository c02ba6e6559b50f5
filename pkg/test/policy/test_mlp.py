import unittest

import numpy as np
import torch
from parameterized import parameterized

from torchtrack.config import Task, load_robot_config
from torchtrack.env.environment import PathTrackingEnv
from torchtrack.policy.mlp import ObservationNormalizer, TrackingPolicy, ValueNetwork, mlp
from torchtrack.spline import build_path
from torchtrack.utils import seeded_init


class TestTrackingPolicy(unittest.TestCase):
    def test_initial_action_is_zero(self):
        policy = seeded_init(0, TrackingPolicy, 26, 3, (16, 8))
        obs = np.random.default_rng(0).normal(size=(5, 26))
        np.testing.assert_array_equal(policy.act(obs), np.zeros((5, 3)))

    def test_actions_bounded(self):
        policy = TrackingPolicy(4, 2, (8,))
        with torch.no_grad():
            policy.net[-1].weight.fill_(10.0)
        action = policy.act(np.full(4, 5.0))
        self.assertTrue(np.all(np.abs(action) <= 1.0))
        self.assertEqual(action.dtype, np.float64)

    def test_sample_log_prob(self):
        policy = TrackingPolicy(4, 2, (8,), init_log_std=-1.0)
        gen = torch.Generator().manual_seed(3)
        action, pre, log_prob = policy.sample(np.zeros(4), generator=gen)
        np.testing.assert_allclose(action, torch.tanh(pre).double().numpy())
        expected = torch.distributions.Normal(torch.zeros(2), torch.full((2,), np.exp(-1.0))).log_prob(pre).sum()
        self.assertAlmostEqual(float(log_prob), float(expected), places=5)

    def test_sample_reproducible(self):
        policy = TrackingPolicy(4, 2, (8,))
        a1 = policy.sample(np.zeros(4), generator=torch.Generator().manual_seed(9))[0]
        a2 = policy.sample(np.zeros(4), generator=torch.Generator().manual_seed(9))[0]
        np.testing.assert_array_equal(a1, a2)

    def test_wrong_observation_size(self):
        with self.assertRaises(ValueError):
            TrackingPolicy(4, 2, (8,)).act(np.zeros(5))

    def test_seeded_init_leaves_global_rng(self):
        torch.manual_seed(123)
        expected = torch.rand(1)
        torch.manual_seed(123)
        a = seeded_init(7, TrackingPolicy, 4, 2, (8,))
        after = torch.rand(1)
        b = seeded_init(7, TrackingPolicy, 4, 2, (8,))
        torch.testing.assert_close(after, expected)
        for pa, pb in zip(a.parameters(), b.parameters()):
            torch.testing.assert_close(pa, pb)

    def test_value_network_shape(self):
        value = ValueNetwork(6, (8, 8))
        self.assertEqual(value(torch.zeros(5, 6)).shape, (5,))
        self.assertEqual(len([m for m in mlp(6, (8, 8), 1) if isinstance(m, torch.nn.Linear)]), 3)


class TestObservationNormalizer(unittest.TestCase):
    @parameterized.expand([("none", Task.NONE), ("ball_beam", Task.BALL_BEAM)])
    def test_for_env(self, _, task):
        robot = load_robot_config("planar3")
        env = PathTrackingEnv(robot, robot.env.replace(task=task))
        normalizer = ObservationNormalizer.for_env(env)
        self.assertEqual(normalizer.dim, env.obs_dim)
        obs = env.reset(build_path([[0.0, 0.0, 0.0], [1.0, 0.5, 0.0]]))
        x = normalizer(obs)
        self.assertEqual(x.shape, (env.obs_dim,))
        self.assertTrue(np.all(np.abs(x) <= 1.0 + 1e-9))

    def test_state_dict_round_trip(self):
        normalizer = ObservationNormalizer([0.0, 1.0], [2.0, 4.0])
        again = ObservationNormalizer.from_state_dict(normalizer.state_dict())
        np.testing.assert_array_equal(again([2.0, 5.0]), [1.0, 1.0])

    def test_invalid(self):
        with self.assertRaises(ValueError):
            ObservationNormalizer([0.0], [0.0])
        with self.assertRaises(ValueError):
            ObservationNormalizer([0.0, 1.0], [1.0])(np.zeros(3))


if __name__ == "__main__":
    unittest.main()
