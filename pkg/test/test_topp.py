import logging
import unittest

import numpy as np
import pytest
from parameterized import parameterized

from torchtrack.config import load_robot_config
from torchtrack.dataset import gen_waypoint_paths
from torchtrack.limits import JointLimits
from torchtrack.spline import build_path
from torchtrack.topp import (
    MIN_STAGES,
    backward_forward,
    duration_report,
    stage_constraints,
    velocity_bound,
)

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)


def _unit_limits(dim=1):
    ones = np.ones(dim)
    return JointLimits(-10 * ones, 10 * ones, -ones, ones, -ones, ones, -10 * ones, 10 * ones)


class TestStraightLine(unittest.TestCase):
    @parameterized.expand(
        [
            # triangle: peak speed 1 exactly at the midpoint
            ("triangle", 1.0, 2.0),
            # trapezoid: 1 s up, 3 s cruise, 1 s down
            ("trapezoid", 4.0, 5.0),
            ("short", 0.25, 1.0),
        ]
    )
    def test_bang_bang_duration(self, _, length, expected):
        param = backward_forward(build_path([[0.0], [length]]), _unit_limits(), K=1000)
        self.assertLessEqual(abs(param.total_duration - expected), 0.02 * expected)

    def test_refinement_converges(self):
        path = build_path([[0.0], [4.0]])
        coarse = backward_forward(path, _unit_limits(), K=1000).total_duration
        fine = backward_forward(path, _unit_limits(), K=2000).total_duration
        self.assertLessEqual(abs(coarse - fine), 0.01 * fine)

    def test_rest_to_rest(self):
        param = backward_forward(build_path([[0.0], [2.0]]), _unit_limits(), K=200)
        self.assertEqual(param.x[0], 0.0)
        self.assertEqual(param.x[-1], 0.0)
        self.assertEqual(param.num_stages, 200)
        self.assertTrue(np.all(param.durations > 0.0))
        np.testing.assert_allclose(param.times[-1], param.total_duration)

    def test_fewest_stages(self):
        path = build_path([[0.0], [1.0]])
        param = backward_forward(path, _unit_limits(), K=MIN_STAGES)
        self.assertEqual(param.num_stages, MIN_STAGES)
        self.assertAlmostEqual(param.total_duration, 2.0, delta=0.04)

    def test_invalid(self):
        path = build_path([[0.0], [1.0]])
        with self.assertRaises(ValueError):
            backward_forward(path, _unit_limits(), K=MIN_STAGES - 1)
        with self.assertRaises(ValueError):
            backward_forward(path, _unit_limits(dim=2), K=100)


class TestConstraints(unittest.TestCase):
    def test_velocity_bound(self):
        limits = _unit_limits(dim=2)
        bound = velocity_bound(np.array([[0.5, 0.0], [0.0, -2.0]]), limits)
        np.testing.assert_allclose(bound, [4.0, 0.25])

    def test_still_joint_is_unbounded(self):
        self.assertEqual(velocity_bound(np.array([[0.0]]), _unit_limits())[0], np.inf)

    def test_halfplanes_shape(self):
        path = build_path([[0.0, 0.0], [1.0, 0.5], [2.0, 0.0]])
        cons = stage_constraints(path, np.linspace(0.0, path.total_length, 5), _unit_limits(dim=2))
        A, b = cons.halfplanes()
        self.assertEqual(A.shape, (5, 4, 2))
        self.assertEqual(b.shape, (5, 4))
        np.testing.assert_array_equal(b[0], [1.0, 1.0, 1.0, 1.0])


class TestRobotPaths(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.robot = load_robot_config("planar3")
        cls.records = gen_waypoint_paths(cls.robot, 3, seed=11, num_workers=1)

    def test_trajectory_within_limits(self):
        limits = self.robot.limits
        for record in self.records:
            path = record.to_path()
            param = backward_forward(path, limits, K=400)
            times, q, qd, qdd = param.joint_trajectory(path)
            self.assertEqual(q.shape, (401, 3))
            self.assertTrue(np.all(np.diff(times) > 0.0))
            np.testing.assert_allclose(q[-1], path.eval(path.total_length), atol=1e-9)
            self.assertTrue(np.all(qd <= limits.v_max * (1 + 1e-6) + 1e-9))
            self.assertTrue(np.all(qd >= limits.v_min * (1 + 1e-6) - 1e-9))
            # the last grid point reuses the final stage's path acceleration
            self.assertTrue(np.all(qdd[:-1] <= limits.a_max * (1 + 1e-6) + 1e-6))
            self.assertTrue(np.all(qdd[:-1] >= limits.a_min * (1 + 1e-6) - 1e-6))

    def test_some_joint_saturates(self):
        param = backward_forward(self.records[0].to_path(), self.robot.limits, K=400)
        _, _, qd, qdd = param.joint_trajectory(self.records[0].to_path())
        speed = np.max(np.abs(qd) / self.robot.limits.v_max, axis=1)
        accel = np.max(np.abs(qdd[:-1]) / self.robot.limits.a_max, axis=1)
        self.assertGreater(max(speed.max(), accel.max()), 0.99)


@pytest.mark.parametrize("policy", [2.5, None], ids=["timed", "missing"])
def test_duration_report(policy):
    frame = duration_report([("p0", 1000, 2.0, policy)])
    assert list(frame.columns) == ["path_id", "K", "duration_topp", "duration_policy", "ratio"]
    if policy is None:
        assert np.isnan(frame["ratio"][0])
    else:
        assert frame["ratio"][0] == pytest.approx(0.8)


if __name__ == "__main__":
    unittest.main()
