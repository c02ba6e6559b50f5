"""Safe action space for jerk-limited joint motion.

Accelerations are chosen once per decision interval ``dt`` and linearly
interpolated in between, so within an interval of length ``dt``::

    a(tau) = a + (a' - a) * tau / dt
    v(tau) = v + a * tau + (a' - a) * tau**2 / (2 * dt)
    p(tau) = p + v * tau + a * tau**2 / 2 + (a' - a) * tau**3 / (6 * dt)

:func:`feasible_range` returns, per joint, the interval of next accelerations
``a'`` from which the robot can always be brought to rest without leaving the
position, velocity, acceleration and jerk limits.
"""

import logging
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from torchtrack import _braking
from torchtrack.errors import InfeasibleStateError, LimitViolationError

logger = logging.getLogger(__name__)

__all__ = [
    "JointLimits",
    "KinematicState",
    "AccelRange",
    "Action",
    "Segment",
    "SafeActionSpace",
    "feasible_range",
    "map_action",
    "integrate_segment",
    "brake_to_rest",
    "segment_extrema",
    "audit_segments",
    "setpoints_frame",
    "write_setpoints_csv",
    "STATE_SLACK",
    "DEFAULT_SUBSTEPS",
    "AUDIT_SUBSTEPS",
]

# tolerance of state checks against the limits
STATE_SLACK = 1e-9
DEFAULT_SUBSTEPS = 10
AUDIT_SUBSTEPS = 100

_BISECTION_ITERATIONS = 60


def _vector(x, name):
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointLimits:
    """Per-joint bounds on position (rad), velocity (rad/s), acceleration
    (rad/s^2) and jerk (rad/s^3). All fields are arrays of length ``D``."""

    p_min: np.ndarray
    p_max: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    a_min: np.ndarray
    a_max: np.ndarray
    j_min: np.ndarray
    j_max: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _vector(getattr(self, f.name), f.name))
        sizes = {getattr(self, f.name).size for f in fields(self)}
        if len(sizes) != 1:
            raise ValueError(f"all limit vectors must have the same length, got {sorted(sizes)}")
        if self.num_joints < 1:
            raise ValueError("limits need at least one joint")
        checks = [
            ("p_min < p_max", self.p_min < self.p_max),
            ("v_min < 0 < v_max", (self.v_min < 0) & (self.v_max > 0)),
            ("a_min < 0 < a_max", (self.a_min < 0) & (self.a_max > 0)),
            ("j_min < 0 < j_max", (self.j_min < 0) & (self.j_max > 0)),
        ]
        for rule, ok in checks:
            if not np.all(ok):
                joint = int(np.flatnonzero(~ok)[0])
                raise ValueError(f"joint {joint} violates {rule}")

    @classmethod
    def from_joints(cls, joints):
        """Build from a sequence of per-joint dicts with the eight limit keys."""
        return cls(**{f.name: [j[f.name] for j in joints] for f in fields(cls)})

    @property
    def num_joints(self):
        return self.p_min.size

    def bounds(self):
        return _braking.Bounds(*(getattr(self, f.name) for f in fields(self)))

    def contains(self, state, slack=STATE_SLACK):
        return not self.violations(state.p, state.v, state.a, slack=slack)

    def check(self, state, slack=STATE_SLACK):
        """Raise :class:`LimitViolationError` if ``state`` leaves the limits by more than ``slack``."""
        bad = self.violations(state.p, state.v, state.a, slack=slack)
        if bad:
            detail = ", ".join(f"{k}={v:.3g}" for k, v in bad.items())
            raise LimitViolationError(f"state outside limits: {detail}")

    def violations(self, p=None, v=None, a=None, jerk=None, slack=0.0):
        """Worst excess over each limit family, only families exceeding ``slack`` are returned."""
        worst = {}
        for name, values, lo, hi in (
            ("position", p, self.p_min, self.p_max),
            ("velocity", v, self.v_min, self.v_max),
            ("acceleration", a, self.a_min, self.a_max),
            ("jerk", jerk, self.j_min, self.j_max),
        ):
            if values is None:
                continue
            values = np.asarray(values, dtype=np.float64)
            excess = float(np.max(np.maximum(values - hi, lo - values), initial=-np.inf))
            if excess > slack:
                worst[name] = excess
        return worst


@dataclass(frozen=True)
class KinematicState:
    """Joint positions (rad), velocities (rad/s) and accelerations (rad/s^2)."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        for name in ("p", "v", "a"):
            object.__setattr__(self, name, _vector(getattr(self, name), name))
        if not (self.p.size == self.v.size == self.a.size):
            raise ValueError("p, v and a must have the same length")

    @classmethod
    def at_rest(cls, p):
        p = np.asarray(p, dtype=np.float64)
        return cls(p, np.zeros_like(p), np.zeros_like(p))

    @property
    def dim(self):
        return self.p.size

    def is_at_rest(self, tol=1e-6):
        return bool(np.all(np.abs(self.v) <= tol) and np.all(np.abs(self.a) <= tol))


@dataclass(frozen=True)
class AccelRange:
    """Safe next accelerations per joint. ``verified`` marks ranges whose end points
    passed the braking safety test when they were computed."""

    lo: np.ndarray
    hi: np.ndarray
    verified: bool = False

    @property
    def span(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class Action:
    """One normalized scalar per joint, clamped to ``[-1, 1]``."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("action values must be finite")
        values = np.clip(values, -1.0, 1.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Segment:
    """One decision interval with its substep setpoints.

    ``t`` holds the substep times relative to the interval start, ``p``, ``v``
    and ``a`` have shape ``(substeps + 1, D)``.
    """

    a_start: np.ndarray
    a_end: np.ndarray
    duration: float
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    @property
    def end_state(self):
        return KinematicState(self.p[-1], self.v[-1], self.a[-1])


def feasible_range(state, limits, dt):
    """Per-joint interval ``[lo, hi]`` of safe next accelerations.

    The interval is the intersection of

    * the jerk window ``[a + j_min * dt, a + j_max * dt]``,
    * the acceleration limits,
    * the velocity interval: the velocity stays within limits over the
      interval and a full-jerk ramp of ``a'`` back to zero afterwards cannot
      overshoot, i.e. ``v' + a' * |a'| / (2 * j)`` stays within limits,

    shrunk by bisection where the braking trajectory started at the end of
    the interval would leave the position or velocity limits.

    Raises:
        LimitViolationError: ``state`` is outside ``limits`` beyond :data:`STATE_SLACK`.
        InfeasibleStateError: no safe continuation exists from ``state``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if state.dim != limits.num_joints:
        raise ValueError(f"state has {state.dim} joints, limits have {limits.num_joints}")
    limits.check(state)
    b = limits.bounds()
    p, v, a = state.p, state.v, state.a

    lo = np.maximum(b.a_min, a + b.j_min * dt)
    hi = np.minimum(b.a_max, a + b.j_max * dt)
    hi = np.minimum(hi, _braking.velocity_upper(v, a, b.v_max, -b.j_min, dt))
    lo = np.maximum(lo, -_braking.velocity_upper(-v, -a, -b.v_min, b.j_max, dt))

    horizon = _braking.braking_horizon(b, dt)
    short = _braking.plan_steps(b, dt)
    both = b.tile(2)
    ends = np.concatenate([lo, hi])
    ok = _braking.candidate_ok(
        np.tile(p, 2), np.tile(v, 2), np.tile(a, 2), ends, both, dt, horizon, short
    )
    if ok.all() and np.all(lo <= hi):
        return AccelRange(lo, hi, verified=True)

    anchor, found = _braking.braking_action(v, a, b, dt, horizon, short)
    anchor_ok = found & _braking.candidate_ok(p, v, a, anchor, b, dt, horizon, short)
    if not anchor_ok.all():
        joints = np.flatnonzero(~anchor_ok).tolist()
        raise InfeasibleStateError(f"no safe continuation for joints {joints}")
    # ends that passed start with a closed bracket and are not tested again
    safe = _braking.bisect_safe(
        np.tile(p, 2),
        np.tile(v, 2),
        np.tile(a, 2),
        np.where(ok, ends, np.tile(anchor, 2)),
        ends,
        both,
        dt,
        horizon,
        _BISECTION_ITERATIONS,
        short,
    )
    d = limits.num_joints
    # the braking action itself is always admissible
    return AccelRange(np.minimum(safe[:d], anchor), np.maximum(safe[d:], anchor), verified=True)


def map_action(action, accel_range):
    """Affine map of ``[-1, 1]`` onto ``[lo, hi]``; ``-1`` and ``1`` hit the bounds exactly."""
    values = action.values if isinstance(action, Action) else Action(action).values
    if values.size != accel_range.lo.size:
        raise ValueError(f"action has {values.size} entries, range has {accel_range.lo.size}")
    w_hi = 0.5 * (1.0 + values)
    w_lo = 0.5 * (1.0 - values)
    return w_lo * accel_range.lo + w_hi * accel_range.hi


def integrate_segment(state, a_next, dt, substeps=DEFAULT_SUBSTEPS):
    """Closed-form integration of one interval.

    Returns ``(segment, end_state)``.
    """
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    a_next = np.asarray(a_next, dtype=np.float64).reshape(-1)
    p, v, a = state.p, state.v, state.a
    tau = np.linspace(0.0, dt, substeps + 1)[:, None]
    jerk = (a_next - a) / dt
    acc = a + jerk * tau
    vel = v + a * tau + 0.5 * jerk * tau**2
    pos = p + v * tau + 0.5 * a * tau**2 + jerk * tau**3 / 6.0
    p_end, v_end = _braking.advance(p, v, a, a_next, dt)
    pos[-1], vel[-1], acc[-1] = p_end, v_end, a_next
    segment = Segment(
        a_start=a.copy(),
        a_end=a_next.copy(),
        duration=float(dt),
        t=tau[:, 0],
        p=pos,
        v=vel,
        a=acc,
    )
    return segment, KinematicState(p_end, v_end, a_next)


def brake_to_rest(state, limits, dt, substeps=DEFAULT_SUBSTEPS):
    """Jerk-limited segments bringing every joint to rest; empty if already resting.

    Raises:
        InfeasibleStateError: the braking trajectory from ``state`` would leave the limits.
    """
    limits.check(state)
    b = limits.bounds()
    ok, history = _braking.brake_rollout(
        state.p, state.v, state.a, b, dt, record=True, short=_braking.plan_steps(b, dt)
    )
    if not ok.all():
        joints = np.flatnonzero(~ok).tolist()
        raise InfeasibleStateError(f"braking leaves the limits for joints {joints}")
    segments = []
    for a_next in history:
        segment, state = integrate_segment(state, a_next, dt, substeps)
        segments.append(segment)
    return segments


def segment_extrema(segment):
    """Exact per-joint ``(p_lo, p_hi, v_lo, v_hi)`` over a segment."""
    return _braking.interval_extrema(
        segment.p[0], segment.v[0], segment.a_start, segment.a_end, segment.duration
    )


def audit_segments(segments, limits):
    """Worst limit excess over the substeps and exact extrema of ``segments``."""
    worst = {}
    for segment in segments:
        p_lo, p_hi, v_lo, v_hi = segment_extrema(segment)
        jerk = (segment.a_end - segment.a_start) / segment.duration
        found = limits.violations(
            p=np.vstack([segment.p, p_lo, p_hi]),
            v=np.vstack([segment.v, v_lo, v_hi]),
            a=segment.a,
            jerk=jerk,
            slack=-np.inf,
        )
        for key, excess in found.items():
            worst[key] = max(worst.get(key, -np.inf), excess)
    return worst


def setpoints_frame(segments, t0=0.0):
    """Per-substep rows ``t, p_i, v_i, a_i`` of consecutive segments."""
    rows = []
    t_start = t0
    for k, segment in enumerate(segments):
        first = 0 if k == 0 else 1
        for n in range(first, len(segment.t)):
            rows.append(
                [t_start + segment.t[n], *segment.p[n], *segment.v[n], *segment.a[n]]
            )
        t_start += segment.duration
    dim = segments[0].p.shape[1] if segments else 0
    columns = (
        ["t"]
        + [f"p_{i}" for i in range(dim)]
        + [f"v_{i}" for i in range(dim)]
        + [f"a_{i}" for i in range(dim)]
    )
    return pd.DataFrame(rows, columns=columns)


def write_setpoints_csv(segments, path, t0=0.0):
    setpoints_frame(segments, t0).to_csv(path, index=False)


class SafeActionSpace:
    """Decision-interval wrapper around :func:`feasible_range` and :func:`map_action`.

    :meth:`next_acceleration` trusts a verified range and clips the mapped
    acceleration into it. Other ranges are re-checked and unsafe entries move
    towards the braking action.
    """

    def __init__(self, limits, dt):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.limits = limits
        self.dt = float(dt)
        self._bounds = limits.bounds()
        self._horizon = _braking.braking_horizon(self._bounds, self.dt)
        self._short = _braking.plan_steps(self._bounds, self.dt)

    def range(self, state):
        return feasible_range(state, self.limits, self.dt)

    def next_acceleration(self, state, action, accel_range=None):
        """Return ``(a_next, accel_range)`` for a normalized action."""
        if accel_range is None:
            accel_range = self.range(state)
        a_next = map_action(action, accel_range)
        if accel_range.verified:
            return np.clip(a_next, accel_range.lo, accel_range.hi), accel_range
        b = self._bounds
        ok = _braking.candidate_ok(
            state.p, state.v, state.a, a_next, b, self.dt, self._horizon, short=self._short
        )
        if ok.all():
            return a_next, accel_range
        anchor, _ = _braking.braking_action(state.v, state.a, b, self.dt, self._horizon, self._short)
        logger.debug(f"mapped acceleration failed the safety test for joints {np.flatnonzero(~ok)}")
        fixed = _braking.bisect_safe(
            state.p, state.v, state.a, anchor, a_next, b, self.dt, self._horizon, short=self._short
        )
        return np.where(ok, a_next, fixed), accel_range

    def brake(self, state, substeps=DEFAULT_SUBSTEPS):
        return brake_to_rest(state, self.limits, self.dt, substeps)
