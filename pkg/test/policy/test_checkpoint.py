import os
import tempfile
import unittest

import numpy as np
import torch

from torchtrack.config import Task, load_robot_config
from torchtrack.errors import TorchTrackError
from torchtrack.policy.checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from torchtrack.policy.train import init_policy


class TestCheckpoint(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.robot = load_robot_config("planar3")

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self._tmp.name, "policy.pt")

    def tearDown(self):
        self._tmp.cleanup()

    def _save(self, env_config=None, **kwargs):
        env_config = env_config or self.robot.env
        policy, normalizer = init_policy(self.robot, env_config, seed=4, hidden_sizes=(16, 8))
        with torch.no_grad():
            policy.net[-1].bias.fill_(0.25)
        save_checkpoint(self.path, policy, normalizer, self.robot.name, env_config, **kwargs)
        return policy, normalizer

    def test_round_trip(self):
        policy, normalizer = self._save(algo="cem", seed=4)
        ckpt = load_checkpoint(self.path)
        self.assertEqual(ckpt.robot, "planar3")
        self.assertEqual((ckpt.algo, ckpt.seed), ("cem", 4))
        self.assertEqual(ckpt.obs_dim, policy.obs_dim)
        self.assertEqual(ckpt.policy.hidden_sizes, (16, 8))
        self.assertEqual(ckpt.env_config, self.robot.env)
        self.assertEqual(ckpt.task, "none")
        self.assertEqual(ckpt.metadata["format_version"], FORMAT_VERSION)
        np.testing.assert_array_equal(ckpt.normalizer.scale, normalizer.scale)
        obs = np.random.default_rng(0).normal(size=policy.obs_dim)
        np.testing.assert_array_equal(ckpt.policy.act(obs), policy.act(obs))

    def test_ball_beam_dimension_recorded(self):
        env_config = self.robot.env.replace(task=Task.BALL_BEAM)
        policy, _ = self._save(env_config)
        ckpt = load_checkpoint(self.path)
        self.assertEqual(ckpt.task, "ball_beam")
        self.assertEqual(ckpt.obs_dim, policy.obs_dim)
        self.assertEqual(torch.load(self.path, weights_only=True)["obs_dim"], 5 * 3 + 2 + 9 + 2)

    def test_minor_version_accepted(self):
        self._save()
        payload = torch.load(self.path, weights_only=True)
        payload["format_version"] = "1.7"
        torch.save(payload, self.path)
        self.assertEqual(load_checkpoint(self.path).metadata["format_version"], "1.7")

    def test_major_version_rejected(self):
        self._save()
        payload = torch.load(self.path, weights_only=True)
        payload["format_version"] = "2.0"
        torch.save(payload, self.path)
        with self.assertRaisesRegex(TorchTrackError, "not compatible"):
            load_checkpoint(self.path)

    def test_missing_field(self):
        self._save()
        payload = torch.load(self.path, weights_only=True)
        del payload["normalizer"]
        torch.save(payload, self.path)
        with self.assertRaisesRegex(TorchTrackError, "normalizer"):
            load_checkpoint(self.path)

    def test_not_a_checkpoint(self):
        with open(self.path, "w") as f:
            f.write("plain text")
        with self.assertRaises(TorchTrackError):
            load_checkpoint(self.path)
        torch.save([1, 2, 3], self.path)
        with self.assertRaises(TorchTrackError):
            load_checkpoint(self.path)


if __name__ == "__main__":
    unittest.main()
