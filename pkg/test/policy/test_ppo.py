import logging
import unittest

import numpy as np
import pytest
import torch
from torch.nn.utils import parameters_to_vector

from torchtrack.config import load_robot_config
from torchtrack.errors import TrainingDivergedError
from torchtrack.policy.cem import CURVE_COLUMNS
from torchtrack.policy.ppo import PPOConfig, PPOTrainer, gae
from torchtrack.policy.train import init_policy, train
from torchtrack.spline import build_path

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)

HIDDEN = (8,)
SMALL = PPOConfig(episodes_per_iteration=3, epochs=2, minibatch_size=16)


def _paths():
    return [
        build_path([[0.0, 0.0, 0.0], [0.8, 0.2, 0.0]]),
        build_path([[0.2, 0.0, 0.0], [0.4, -0.6, 0.1], [0.9, -0.6, 0.3]]),
    ]


def test_gae_matches_discounted_returns():
    rewards = [1.0, 0.5, 2.0]
    values = np.zeros(3)
    adv, ret = gae(rewards, values, gamma=0.9, lam=1.0)
    expected = [1.0 + 0.9 * 0.5 + 0.81 * 2.0, 0.5 + 0.9 * 2.0, 2.0]
    np.testing.assert_allclose(adv, expected)
    np.testing.assert_allclose(ret, expected)


def test_gae_one_step_td():
    rewards = np.array([1.0, 1.0])
    values = np.array([0.5, 2.0])
    adv, ret = gae(rewards, values, gamma=0.5, lam=0.0)
    np.testing.assert_allclose(adv, [1.0 + 0.5 * 2.0 - 0.5, 1.0 - 2.0])
    np.testing.assert_allclose(ret, adv + values)


@pytest.mark.parametrize(
    "kwargs", [dict(lr=0.0), dict(clip=-0.1), dict(gamma=1.5), dict(lam=-0.1), dict(minibatch_size=0)]
)
def test_config_invalid(kwargs):
    with pytest.raises(ValueError):
        PPOConfig(**kwargs)


class TestPPOTraining(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        robot = load_robot_config("planar3")
        cls.robot = robot.replace(env=robot.env.replace(max_steps=12))

    def _trainer(self, seed=0, num_workers=1):
        policy, normalizer = init_policy(self.robot, seed=seed, hidden_sizes=HIDDEN)
        return PPOTrainer(self.robot, self.robot.env, policy, normalizer, _paths(), SMALL, seed, num_workers)

    def test_collect(self):
        episodes = self._trainer().collect()
        self.assertEqual(len(episodes), SMALL.episodes_per_iteration)
        for e in episodes:
            self.assertEqual(len(e.observations), e.steps)
            self.assertEqual(len(e.log_probs), e.steps)
            self.assertEqual(len(e.rewards), e.steps)
            self.assertEqual(e.segments, [])
            self.assertAlmostEqual(sum(e.rewards), e.episode_return, places=9)

    def test_collect_independent_of_workers(self):
        a = self._trainer(seed=5, num_workers=1).collect()
        b = self._trainer(seed=5, num_workers=2).collect()
        for ea, eb in zip(a, b):
            self.assertEqual(ea.rewards, eb.rewards)
            torch.testing.assert_close(torch.stack(ea.pre_actions), torch.stack(eb.pre_actions), rtol=0, atol=0)

    def test_update_moves_policy(self):
        trainer = self._trainer()
        before = parameters_to_vector(trainer.policy.parameters()).clone()
        row = trainer.step(0)
        after = parameters_to_vector(trainer.policy.parameters())
        self.assertFalse(torch.equal(before, after))
        self.assertEqual(set(row), set(CURVE_COLUMNS))

    def test_non_finite_loss(self):
        trainer = self._trainer()
        episodes = trainer.collect()
        episodes[0].rewards[0] = float("nan")
        with self.assertRaises(TrainingDivergedError) as ctx:
            trainer.update(episodes, 7)
        self.assertEqual(ctx.exception.diagnostics["iteration"], 7)
        self.assertIn("log_std", ctx.exception.diagnostics)

    def test_train_reproducible(self):
        runs = [
            train(self.robot, _paths(), algo="ppo", budget=2, seed=2, ppo_config=SMALL, hidden_sizes=HIDDEN)
            for _ in range(2)
        ]
        self.assertTrue(runs[0].curve.equals(runs[1].curve))
        self.assertEqual(list(runs[0].curve.columns), CURVE_COLUMNS)
        torch.testing.assert_close(
            parameters_to_vector(runs[0].policy.parameters()),
            parameters_to_vector(runs[1].policy.parameters()),
            rtol=0,
            atol=0,
        )


if __name__ == "__main__":
    unittest.main()
