import logging
import unittest

import numpy as np
import torch
from parameterized import parameterized
from torch.nn.utils import parameters_to_vector

from torchtrack.config import load_robot_config
from torchtrack.policy.cem import CURVE_COLUMNS, CEMConfig, CEMTrainer, select_elites
from torchtrack.policy.train import init_policy, train
from torchtrack.spline import build_path

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)

HIDDEN = (8,)
SMALL = CEMConfig(population=4, elite_fraction=0.5, paths_per_candidate=2)


def _paths():
    return [
        build_path([[0.0, 0.0, 0.0], [0.8, 0.2, 0.0]]),
        build_path([[0.0, 0.3, 0.0], [-0.5, 0.3, 0.4]]),
        build_path([[0.2, 0.0, 0.0], [0.4, -0.6, 0.1], [0.9, -0.6, 0.3]]),
    ]


class TestSelectElites(unittest.TestCase):
    def test_best_first(self):
        candidates = np.eye(4)
        self.assertEqual(select_elites(candidates, [1.0, 4.0, 2.0, 3.0], 2), [1, 3])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        candidates = rng.normal(size=(8, 5))
        returns = np.array([1.0, 2.0, 2.0, 0.5, 2.0, 3.0, 2.0, 0.0])
        elites = candidates[select_elites(candidates, returns, 4)]
        perm = rng.permutation(8)
        permuted = candidates[perm][select_elites(candidates[perm], returns[perm], 4)]
        np.testing.assert_array_equal(elites, permuted)


class TestCEMConfig(unittest.TestCase):
    def test_num_elites(self):
        self.assertEqual(CEMConfig().num_elites, 4)
        self.assertEqual(CEMConfig(population=3, elite_fraction=0.1).num_elites, 1)

    @parameterized.expand(
        [
            ("population", dict(population=1)),
            ("fraction", dict(elite_fraction=0.0)),
            ("std", dict(init_std=0.0)),
            ("paths", dict(paths_per_candidate=0)),
        ]
    )
    def test_invalid(self, _, kwargs):
        with self.assertRaises(ValueError):
            CEMConfig(**kwargs)


class TestCEMTraining(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        robot = load_robot_config("planar3")
        cls.robot = robot.replace(env=robot.env.replace(max_steps=15))

    def _train(self, seed, num_workers=1, budget=2):
        return train(
            self.robot,
            _paths(),
            algo="cem",
            budget=budget,
            seed=seed,
            num_workers=num_workers,
            cem_config=SMALL,
            hidden_sizes=HIDDEN,
        )

    def test_budget_zero_keeps_initial_policy(self):
        result = self._train(seed=0, budget=0)
        initial, _ = init_policy(self.robot, seed=0, hidden_sizes=HIDDEN)
        self.assertEqual(list(result.curve.columns), CURVE_COLUMNS)
        self.assertEqual(len(result.curve), 0)
        for a, b in zip(result.policy.parameters(), initial.parameters()):
            torch.testing.assert_close(a, b)

    def test_curve(self):
        result = self._train(seed=1)
        self.assertEqual(list(result.curve["iteration"]), [0, 1])
        self.assertTrue(np.all(np.isfinite(result.curve[CURVE_COLUMNS].to_numpy(dtype=np.float64))))
        self.assertEqual(result.algo, "cem")

    def test_same_seed_identical(self):
        a = self._train(seed=3, num_workers=1)
        b = self._train(seed=3, num_workers=2)
        self.assertTrue(a.curve.equals(b.curve))
        torch.testing.assert_close(
            parameters_to_vector(a.policy.parameters()), parameters_to_vector(b.policy.parameters()), rtol=0, atol=0
        )

    def test_different_seed_differs(self):
        a = self._train(seed=3, budget=1)
        b = self._train(seed=4, budget=1)
        self.assertFalse(
            torch.equal(parameters_to_vector(a.policy.parameters()), parameters_to_vector(b.policy.parameters()))
        )

    def test_std_floor(self):
        policy, normalizer = init_policy(self.robot, seed=0, hidden_sizes=HIDDEN)
        config = CEMConfig(population=2, elite_fraction=0.5, init_std=1e-4, min_std=0.01, paths_per_candidate=1)
        trainer = CEMTrainer(self.robot, self.robot.env, policy, normalizer, _paths(), config, seed=0, num_workers=1)
        trainer.step(0)
        # a single elite has zero spread
        np.testing.assert_array_equal(trainer.std, np.full_like(trainer.std, 0.01))
        np.testing.assert_allclose(
            parameters_to_vector(policy.net.parameters()).double().numpy(), trainer.mean, rtol=1e-6, atol=1e-7
        )

    def test_needs_paths(self):
        with self.assertRaises(ValueError):
            train(self.robot, [], algo="cem", budget=1)
        with self.assertRaises(ValueError):
            train(self.robot, _paths(), algo="sgd", budget=1)


if __name__ == "__main__":
    unittest.main()
