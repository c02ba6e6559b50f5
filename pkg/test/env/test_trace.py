import json
import os
import tempfile
import unittest

import numpy as np

from torchtrack.config import load_robot_config
from torchtrack.env.environment import PathTrackingEnv
from torchtrack.env.trace import TRACE_VERSION, export_trace, read_trace, replay_trace, write_trace
from torchtrack.errors import EnvError
from torchtrack.spline import build_path


def _path():
    return build_path([[0.0, 0.0, 0.0], [0.6, 0.3, -0.2], [1.2, 0.1, 0.1]])


class TestTrace(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.robot = load_robot_config("planar3")

    def _episode(self, steps=12, braked=True):
        env = PathTrackingEnv(self.robot, record_trace=True)
        env.reset(_path(), path_id="p0")
        rng = np.random.default_rng(1)
        for _ in range(steps):
            _, _, done, _ = env.step(rng.uniform(-0.5, 1.0, size=3))
            if done:
                break
        if braked:
            env.brake()
        return env, export_trace(env, braked=braked)

    def test_contents(self):
        env, trace = self._episode()
        self.assertEqual(trace["version"], TRACE_VERSION)
        self.assertEqual(trace["robot"], "planar3")
        self.assertEqual(trace["path_id"], "p0")
        self.assertEqual(len(trace["actions"]), env.steps)
        self.assertEqual(len(trace["rows"]), env.steps)
        self.assertTrue(trace["braked"])
        first = trace["rows"][0]
        for key in ("t", "action", "a_next", "p", "v", "a", "progress", "l", "d", "r_l", "r_d", "r_s", "total"):
            self.assertIn(key, first)
        self.assertTrue(np.allclose(trace["end_state"]["v"], 0.0, atol=1e-6))

    def test_replay_reproduces_end_state(self):
        for braked in (False, True):
            _, trace = self._episode(braked=braked)
            state = replay_trace(json.loads(json.dumps(trace)), _path(), self.robot)
            np.testing.assert_allclose(state.p, trace["end_state"]["p"], atol=1e-12, rtol=0)
            np.testing.assert_allclose(state.v, trace["end_state"]["v"], atol=1e-12, rtol=0)
            np.testing.assert_allclose(state.a, trace["end_state"]["a"], atol=1e-12, rtol=0)

    def test_file_round_trip(self):
        _, trace = self._episode(steps=3, braked=False)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "trace.json")
            write_trace(trace, path)
            self.assertEqual(read_trace(path)["actions"], trace["actions"])
            trace["version"] = TRACE_VERSION + 1
            write_trace(trace, path)
            with self.assertRaises(EnvError):
                read_trace(path)

    def test_needs_recording(self):
        env = PathTrackingEnv(self.robot)
        env.reset(_path())
        with self.assertRaises(EnvError):
            export_trace(env)


if __name__ == "__main__":
    unittest.main()
