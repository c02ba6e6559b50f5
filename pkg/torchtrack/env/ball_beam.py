"""Ball rolling on a beam carried by the last link.

Reduced-order frictionless model ``b'' = -g * sin(phi)`` where ``b`` is the
ball position along the beam (m, 0 at the center) and ``phi`` the beam tilt.
The beam is the last link's x-axis; its tilt is measured against the
horizontal and leveled at the episode start pose.
"""

from typing import NamedTuple

import numpy as np

from torchtrack.env.reward import reward_task
from torchtrack.kinematics import fk_batch, orientation_angle

__all__ = ["BallState", "ball_beam_step", "beam_tilt", "BallBeamTask"]

_WORLD_UP = np.array([0.0, 0.0, 1.0])
_BEAM_AXIS = np.array([1.0, 0.0, 0.0])


class BallState(NamedTuple):
    b: float
    b_dot: float


def beam_tilt(chain, q):
    """Elevation (rad) of the last link's x-axis above the horizontal, per row of ``q``."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    _, quat = fk_batch(chain, q)
    return 0.5 * np.pi - orientation_angle(quat, _WORLD_UP, _BEAM_AXIS)


def ball_beam_step(state, beam_angle, dt, substeps, half_length, gravity=9.81):
    """Advance the ball over one decision interval.

    ``beam_angle`` is a scalar or one tilt per substep, held constant over each
    substep. Returns ``(state, r_s, dropped)``.
    """
    h = dt / substeps
    angles = np.broadcast_to(np.asarray(beam_angle, dtype=np.float64), (substeps,))
    b, b_dot = float(state.b), float(state.b_dot)
    dropped = False
    for phi in angles:
        acc = -gravity * np.sin(phi)
        b += b_dot * h + 0.5 * acc * h * h
        b_dot += acc * h
        if abs(b) > half_length:
            dropped = True
            break
    r_s = reward_task(b, half_length)
    return BallState(b, b_dot), r_s, dropped


class BallBeamTask:
    """Sensory-feedback task: keep the ball near the beam center."""

    feedback_dim = 2

    def __init__(self, chain, config):
        self.chain = chain
        self.config = config
        self.state = BallState(0.0, 0.0)
        self._tilt0 = 0.0

    def reset(self, q):
        self._tilt0 = float(beam_tilt(self.chain, q)[0])
        self.state = BallState(0.0, 0.0)
        return self.feedback()

    def tilt(self, q):
        return beam_tilt(self.chain, q) - self._tilt0

    def step(self, substep_positions, dt):
        """Integrate along the substep positions of one segment; returns ``(r_s, dropped)``."""
        # tilt at the start of each substep
        angles = self.tilt(substep_positions[:-1])
        self.state, r_s, dropped = ball_beam_step(
            self.state,
            angles,
            dt,
            len(angles),
            self.config.half_length,
            self.config.gravity,
        )
        return r_s, dropped

    def feedback(self):
        return np.array([self.state.b, self.state.b_dot], dtype=np.float64)

    def scale(self):
        length = self.config.half_length
        return np.array([length, np.sqrt(self.config.gravity * length)])
