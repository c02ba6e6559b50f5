"""Offline time-optimal path parameterization by reachability analysis.

The path ``q(s)`` is traversed with path velocity ``sdot`` and path
acceleration ``u = sddot``. In terms of ``x = sdot**2``::

    qdot  = q'(s) * sqrt(x)
    qddot = q''(s) * x + q'(s) * u

so velocity limits bound ``x`` and acceleration limits are halfplanes in
``(x, u)``. On a grid of ``K`` stages with constant ``u`` per stage,
``x[i + 1] = x[i] + 2 * ds * u[i]``. A backward pass computes the largest
``x`` per stage from which rest at the path end stays reachable, a greedy
forward pass then accelerates as hard as these bounds allow. Jerk limits are
not considered.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd

from torchtrack.errors import ToppInfeasibleError

logger = logging.getLogger(__name__)

__all__ = [
    "StageConstraints",
    "Parameterization",
    "velocity_bound",
    "stage_constraints",
    "backward_forward",
    "duration_report",
    "MIN_STAGES",
    "TANGENT_EPS",
]

MIN_STAGES = 16
# joints moving slower than this along the path do not bound x by velocity
TANGENT_EPS = 1e-12
_TOL = 1e-9


class StageConstraints(NamedTuple):
    """Per-stage constraints ``x <= x_max`` and ``a_min <= q_ss * x + q_s * u <= a_max``."""

    x_max: np.ndarray
    q_s: np.ndarray
    q_ss: np.ndarray
    a_min: np.ndarray
    a_max: np.ndarray

    def halfplanes(self):
        """``(A, b)`` with ``A @ [x, u] <= b`` per stage; shapes ``(n, 2D, 2)`` and ``(n, 2D)``."""
        upper = np.stack([self.q_ss, self.q_s], axis=-1)
        A = np.concatenate([upper, -upper], axis=1)
        n = self.q_s.shape[0]
        b = np.concatenate(
            [np.broadcast_to(self.a_max, (n, self.a_max.size)), -np.broadcast_to(self.a_min, (n, self.a_min.size))],
            axis=1,
        )
        return A, b


@dataclass(frozen=True)
class Parameterization:
    """Rest-to-rest timing of a path on ``K + 1`` grid points.

    ``x`` holds squared path velocities at the grid points, ``u`` the constant
    path acceleration of each of the ``K`` stages.
    """

    s: np.ndarray
    x: np.ndarray
    u: np.ndarray
    durations: np.ndarray

    @property
    def num_stages(self):
        return len(self.durations)

    @property
    def total_duration(self):
        return float(np.sum(self.durations))

    @property
    def times(self):
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    def joint_trajectory(self, path):
        """Joint positions, velocities and accelerations at the grid points.

        The acceleration at a grid point uses the path acceleration of the stage
        starting there (the last point uses the last stage).
        """
        q, q_s, q_ss = path.derivatives(self.s)
        q_s, q_ss = np.atleast_2d(q_s), np.atleast_2d(q_ss)
        u = np.concatenate([self.u, self.u[-1:]]) if self.u.size else np.zeros_like(self.x)
        qd = q_s * np.sqrt(self.x)[:, None]
        qdd = q_ss * self.x[:, None] + q_s * u[:, None]
        return self.times, q, qd, qdd


def velocity_bound(q_s, limits):
    """Largest ``x`` with ``q_s * sqrt(x)`` inside the velocity limits, per row of ``q_s``."""
    q_s = np.atleast_2d(np.asarray(q_s, dtype=np.float64))
    bound = np.where(q_s > 0.0, limits.v_max, -limits.v_min)
    moving = np.abs(q_s) >= TANGENT_EPS
    with np.errstate(divide="ignore"):
        per_joint = np.where(moving, (bound / np.where(moving, np.abs(q_s), 1.0)) ** 2, np.inf)
    return per_joint.min(axis=1)


def stage_constraints(path, s, limits):
    """Velocity bound and acceleration halfplanes at arc lengths ``s``."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    _, q_s, q_ss = path.derivatives(s)
    q_s, q_ss = np.atleast_2d(q_s), np.atleast_2d(q_ss)
    return StageConstraints(
        x_max=velocity_bound(q_s, limits),
        q_s=q_s,
        q_ss=q_ss,
        a_min=limits.a_min,
        a_max=limits.a_max,
    )


def _u_lines(cons):
    """Bounds on ``u`` as lines ``l0 + l1 * x`` (lower) and ``h0 + h1 * x`` (upper)."""
    q_s, q_ss = cons.q_s, cons.q_ss
    moving = np.abs(q_s) >= TANGENT_EPS
    safe = np.where(moving, q_s, 1.0)
    positive = q_s > 0.0
    lo_acc = np.where(positive, cons.a_min, cons.a_max)
    hi_acc = np.where(positive, cons.a_max, cons.a_min)
    slope = -q_ss / safe
    l0 = np.where(moving, lo_acc / safe, -np.inf)
    h0 = np.where(moving, hi_acc / safe, np.inf)
    l1 = np.where(moving, slope, 0.0)
    h1 = np.where(moving, slope, 0.0)
    return l0, l1, h0, h1, moving


def _upper_bound(coef, rhs):
    """Largest ``x >= 0`` with ``coef * x <= rhs`` for every entry (``rhs >= 0``), reduced over the last axis."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(coef > 0.0, rhs / coef, np.inf)
    return np.min(bound, axis=-1)


def _admissible_x(cons):
    """Largest ``x`` per stage with a non-empty ``u`` interval."""
    l0, l1, h0, h1, moving = _u_lines(cons)
    # pair every lower line with every upper line
    coef = l1[:, :, None] - h1[:, None, :]
    rhs = h0[:, None, :] - l0[:, :, None]
    pair = (moving[:, :, None] & moving[:, None, :]).reshape(len(coef), -1)
    coef = np.where(pair, coef.reshape(len(coef), -1), 0.0)
    rhs = np.where(pair, rhs.reshape(len(rhs), -1), 1.0)
    x_pairs = _upper_bound(coef, rhs)
    # joints at rest along the path: a_min <= q_ss * x <= a_max
    q_ss = np.where(moving, 0.0, cons.q_ss)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_still = np.where(
            q_ss > 0.0, cons.a_max / q_ss, np.where(q_ss < 0.0, cons.a_min / q_ss, np.inf)
        )
    return np.minimum(np.minimum(cons.x_max, x_pairs), x_still.min(axis=1))


def backward_forward(path, limits, K=1000):
    """Time-optimal rest-to-rest parameterization of ``path`` on ``K`` stages.

    Raises:
        ValueError: ``K`` below :data:`MIN_STAGES`.
        ToppInfeasibleError: no admissible path acceleration at some stage.
    """
    if K < MIN_STAGES:
        raise ValueError(f"need at least {MIN_STAGES} stages, got K={K}")
    if path.dim != limits.num_joints:
        raise ValueError(f"path has {path.dim} joints, limits have {limits.num_joints}")
    length = path.total_length
    s = np.linspace(0.0, length, K + 1)
    if length == 0.0:
        zeros = np.zeros(K + 1)
        return Parameterization(s=s, x=zeros, u=np.zeros(K), durations=np.zeros(K))
    ds = length / K
    cons = stage_constraints(path, s, limits)
    l0, l1, h0, h1, moving = _u_lines(cons)
    x_adm = _admissible_x(cons)
    bad = np.isnan(x_adm) | (x_adm < 0.0)
    if bad.any():
        stage = int(np.flatnonzero(bad)[0])
        raise ToppInfeasibleError(stage, "no admissible path velocity")

    # backward: largest x from which x[i + 1] <= xc[i + 1] stays reachable
    xc = np.empty(K + 1)
    xc[K] = 0.0
    for i in range(K - 1, -1, -1):
        # can decelerate into the next controllable bound: x + 2 ds u_lo(x) <= xc
        decel = _upper_bound(
            np.where(moving[i], 1.0 + 2.0 * ds * l1[i], 0.0),
            np.where(moving[i], xc[i + 1] - 2.0 * ds * l0[i], 1.0),
        )
        # can avoid reversing: x + 2 ds u_hi(x) >= 0
        hold = _upper_bound(
            np.where(moving[i], -(1.0 + 2.0 * ds * h1[i]), 0.0),
            np.where(moving[i], 2.0 * ds * h0[i], 1.0),
        )
        xc[i] = max(min(x_adm[i], decel, hold), 0.0)

    # forward: accelerate greedily inside the controllable bounds
    x = np.empty(K + 1)
    u = np.empty(K)
    x[0] = 0.0
    for i in range(K):
        lo = np.max(np.where(moving[i], l0[i] + l1[i] * x[i], -np.inf))
        hi = np.min(np.where(moving[i], h0[i] + h1[i] * x[i], np.inf))
        if not np.isfinite(hi):
            hi = (xc[i + 1] - x[i]) / (2.0 * ds)
        u[i] = min(hi, (xc[i + 1] - x[i]) / (2.0 * ds))
        if u[i] < lo - _TOL * max(1.0, abs(lo)):
            logger.warning(f"TOPP infeasible at stage {i} of {K}")
            raise ToppInfeasibleError(i, f"u in [{lo:.6g}, {hi:.6g}] cannot reach x <= {xc[i + 1]:.6g}")
        x[i + 1] = max(x[i] + 2.0 * ds * u[i], 0.0)
    x[K] = 0.0

    root = np.sqrt(x)
    speed_sum = root[:-1] + root[1:]
    if np.any(speed_sum <= 0.0):
        stage = int(np.flatnonzero(speed_sum <= 0.0)[0])
        raise ToppInfeasibleError(stage, "path velocity vanishes inside the path")
    durations = 2.0 * ds / speed_sum
    return Parameterization(s=s, x=x, u=u, durations=durations)


def duration_report(rows):
    """Comparison table from ``(path_id, K, duration_topp, duration_policy)`` tuples.

    ``duration_policy`` may be ``None``; ratio is ``duration_topp / duration_policy``.
    """
    frame = pd.DataFrame(rows, columns=["path_id", "K", "duration_topp", "duration_policy"])
    frame["duration_policy"] = frame["duration_policy"].astype("float64")
    frame["ratio"] = frame["duration_topp"] / frame["duration_policy"]
    return frame
