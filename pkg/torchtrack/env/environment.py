"""Path tracking as a Markov decision process.

Each decision step maps a normalized action onto the safe acceleration range,
integrates the resulting jerk-limited segment, advances the path progress by
the generated arc length and rewards the step by its length and its deviation
from the reference path.
"""

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from torchtrack.config import Task
from torchtrack.env.ball_beam import BallBeamTask
from torchtrack.env.reward import reward_deviation, reward_length, reward_total
from torchtrack.errors import EnvError
from torchtrack.limits import (
    Action,
    KinematicState,
    SafeActionSpace,
    integrate_segment,
)
from torchtrack.spline import KnotWindow, knot_window, state_knots

logger = logging.getLogger(__name__)

__all__ = [
    "Observation",
    "SwapPolicy",
    "PathTrackingEnv",
    "state_knot_count",
    "prepare_path",
]

# relative resolution of the nearest-point grid search in swap_path
_SWAP_GRID = 1e-3


@dataclass(frozen=True)
class Observation:
    knot_window: KnotWindow
    l_state: float
    offset: float
    kin: KinematicState
    feedback: Optional[np.ndarray] = None

    def flatten(self):
        """``[window knots, l_state, offset, p, v, a, feedback]`` as one float64 vector."""
        parts = [
            self.knot_window.knots.reshape(-1),
            [self.l_state, self.offset],
            self.kin.p,
            self.kin.v,
            self.kin.a,
        ]
        if self.feedback is not None:
            parts.append(self.feedback)
        return np.concatenate([np.asarray(x, dtype=np.float64) for x in parts])


class SwapPolicy(Enum):
    KEEP_PROGRESS_BY_NEAREST = "keep_progress_by_nearest"
    RESTART = "restart"


def state_knot_count(length, config):
    return max(config.n_knots, int(math.ceil(length / config.knot_spacing)) + 1)


def prepare_path(path, config):
    """State knots of a reference path, keyed by arc length along the reference."""
    return state_knots(path, state_knot_count(path.total_length, config), config.sampling)


class PathTrackingEnv:
    """Single-robot tracking environment, one episode at a time.

    Args:
        robot: :class:`~torchtrack.config.RobotConfig`.
        config: episode configuration, ``robot.env`` by default.
        record_trace: keep per-step rows and substep setpoints for :mod:`torchtrack.env.trace`.
    """

    def __init__(self, robot, config=None, record_trace=False):
        self.robot = robot
        self.config = config or robot.env
        self.limits = robot.limits
        self.action_space = SafeActionSpace(robot.limits, self.config.dt)
        self.record_trace = record_trace
        self.task = None
        if self.config.task is Task.BALL_BEAM:
            self.task = BallBeamTask(robot.chain, self.config.ball_beam)
        self.path = None
        self.state_knots = None
        self.path_id = None
        self.state = None
        self.progress = 0.0
        self.steps = 0
        self.time = 0.0
        self.done = True
        self.done_reason = None
        self.step_times = []
        self.trace_rows = []
        self.segments = []
        self.actions = []
        self._window = None
        self._range = None

    @property
    def num_joints(self):
        return self.limits.num_joints

    @property
    def obs_dim(self):
        extra = self.task.feedback_dim if self.task is not None else 0
        return self.config.n_knots * self.num_joints + 2 + 3 * self.num_joints + extra

    @property
    def action_dim(self):
        return self.num_joints

    @property
    def reference(self):
        """The reference path of the running episode (same object as ``path``)."""
        return self.path

    @property
    def at_path_end(self):
        return self.path is not None and self.progress >= self.path.total_length

    def _check_path(self, path):
        if path.dim != self.num_joints:
            raise EnvError(f"path has {path.dim} joints, robot has {self.num_joints}")

    def _observe(self):
        self._window = knot_window(self.state_knots, self.progress, self.config.n_knots)
        feedback = self.task.feedback() if self.task is not None else None
        return Observation(
            knot_window=self._window,
            l_state=self._window.l_state,
            offset=self._window.offset,
            kin=self.state,
            feedback=feedback,
        )

    def reset(self, path, start=None, path_id=None):
        """Start an episode at the beginning of ``path``.

        ``start`` defaults to the first path point at rest.
        """
        self._check_path(path)
        self.path = path
        self.state_knots = prepare_path(path, self.config)
        self.path_id = path_id
        if start is None:
            start = KinematicState.at_rest(self.path.eval(0.0))
        elif start.dim != self.num_joints:
            raise EnvError(f"start state has {start.dim} joints, robot has {self.num_joints}")
        # raises for states outside the limits or without a safe continuation
        self._range = self.action_space.range(start)
        self.state = start
        self.progress = 0.0
        self.steps = 0
        self.time = 0.0
        self.done = False
        self.done_reason = None
        self.step_times = []
        self.trace_rows = []
        self.segments = []
        self.actions = []
        if self.task is not None:
            self.task.reset(start.p)
        return self._observe()

    def step(self, action):
        """Apply one normalized action.

        Returns ``(observation, reward, done, info)``.
        """
        if self.done:
            raise EnvError("step() called on a finished episode, call reset() first")
        values = np.asarray(getattr(action, "values", action), dtype=np.float64).reshape(-1)
        if values.size != self.num_joints:
            raise EnvError(f"action has {values.size} entries, robot has {self.num_joints} joints")
        if not np.all(np.isfinite(values)):
            raise EnvError("action must be finite")
        action = Action(values)
        started = time.perf_counter()

        cfg = self.config
        a_next, accel_range = self.action_space.next_acceleration(self.state, action, self._range)
        segment, new_state = integrate_segment(self.state, a_next, cfg.dt, cfg.substeps)
        cumulative = np.concatenate(
            [[0.0], np.cumsum(np.linalg.norm(np.diff(segment.p, axis=0), axis=1))]
        )
        length = float(cumulative[-1])
        total_length = self.path.total_length
        reference = self.path.eval(np.minimum(self.progress + cumulative, total_length))
        deviation = float(np.mean(np.linalg.norm(segment.p - reference, axis=1)))

        r_s, dropped = 0.0, False
        if self.task is not None:
            r_s, dropped = self.task.step(segment.p, cfg.dt)
        reward = reward_total(
            (
                reward_length(length, self._window.l_state, cfg.reward),
                reward_deviation(deviation, cfg.reward),
                r_s,
            ),
            cfg.reward,
            l=length,
            d=deviation,
        )

        self.state = new_state
        self.progress = min(self.progress + length, total_length)
        self.steps += 1
        self.time += cfg.dt
        if dropped:
            self.done_reason = "ball_dropped"
        elif deviation > cfg.max_deviation:
            self.done_reason = "deviation"
        elif self.steps >= cfg.max_steps:
            self.done_reason = "max_steps"
        self.done = self.done_reason is not None
        self._range = None if self.done else self.action_space.range(self.state)
        obs = self._observe()
        self.step_times.append(time.perf_counter() - started)

        if self.record_trace:
            self.actions.append(values.copy())
            self.segments.append(segment)
            self.trace_rows.append(
                {
                    "t": self.time,
                    "action": values.tolist(),
                    "a_next": a_next.tolist(),
                    "p": new_state.p.tolist(),
                    "v": new_state.v.tolist(),
                    "a": new_state.a.tolist(),
                    "progress": self.progress,
                    "l": length,
                    "d": deviation,
                    "r_l": reward.r_l,
                    "r_d": reward.r_d,
                    "r_s": reward.r_s,
                    "total": reward.total,
                    "done_reason": self.done_reason,
                }
            )
        info = {
            "accel_range": accel_range,
            "a_next": a_next,
            "segment": segment,
            "done_reason": self.done_reason,
            "at_path_end": self.at_path_end,
        }
        return obs, reward, self.done, info

    def _nearest_progress(self, path, point):
        length = path.total_length
        if length == 0.0:
            return 0.0
        grid = np.linspace(0.0, length, int(math.ceil(1.0 / _SWAP_GRID)) + 1)
        dist = np.linalg.norm(path.eval(grid) - point, axis=1)
        k = int(np.argmin(dist))
        best, best_dist = float(grid[k]), float(dist[k])
        if 0 < k < len(grid) - 1:

            def objective(s):
                return float(np.linalg.norm(path.eval(min(max(s, 0.0), length)) - point))

            try:
                result = minimize_scalar(
                    objective, bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden"
                )
            except ValueError:
                # bracket not strictly valley shaped, keep the grid point
                return best
            s = min(max(float(result.x), 0.0), length)
            if objective(s) <= best_dist:
                best = s
        return best

    def swap_path(self, new_path, policy=SwapPolicy.KEEP_PROGRESS_BY_NEAREST):
        """Replace the reference path while the episode runs."""
        if self.path is None or self.done:
            raise EnvError("swap_path() needs a running episode")
        self._check_path(new_path)
        policy = SwapPolicy(policy)
        self.path = new_path
        self.state_knots = prepare_path(new_path, self.config)
        if policy is SwapPolicy.RESTART:
            self.progress = 0.0
        else:
            self.progress = self._nearest_progress(self.path, self.state.p)
        logger.debug(f"swapped path at step {self.steps}, progress {self.progress:.6g}")
        return self._observe()

    def brake(self):
        """Bring the robot to rest; returns the braking segments."""
        segments = self.action_space.brake(self.state, self.config.substeps)
        if segments:
            self.state = segments[-1].end_state
            self.time += len(segments) * self.config.dt
        if self.record_trace:
            self.segments.extend(segments)
        return segments

    @property
    def realtime_ratio(self):
        """Computation time per generated trajectory time."""
        if not self.steps:
            return 0.0
        return float(np.sum(self.step_times)) / (self.steps * self.config.dt)
