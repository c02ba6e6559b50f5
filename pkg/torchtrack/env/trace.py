"""Step traces for plotting and replay.

A trace is a JSON document holding the episode configuration, the applied
actions, one row per decision step and the substep setpoints of every
segment (braking included).
"""

import json
import logging

import numpy as np

from torchtrack.config import EnvConfig
from torchtrack.env.environment import PathTrackingEnv
from torchtrack.errors import EnvError
from torchtrack.limits import KinematicState, setpoints_frame

logger = logging.getLogger(__name__)

__all__ = ["TRACE_VERSION", "export_trace", "replay_trace", "write_trace", "read_trace"]

TRACE_VERSION = 1


def export_trace(env, braked=False):
    """JSON-serializable trace of the current episode of ``env`` (needs ``record_trace=True``)."""
    if not env.record_trace:
        raise EnvError("trace export needs an environment created with record_trace=True")
    frame = setpoints_frame(env.segments)
    start = env.segments[0] if env.segments else None
    start_state = (
        {"p": start.p[0].tolist(), "v": start.v[0].tolist(), "a": start.a_start.tolist()}
        if start is not None
        else {"p": env.state.p.tolist(), "v": env.state.v.tolist(), "a": env.state.a.tolist()}
    )
    return {
        "version": TRACE_VERSION,
        "robot": env.robot.name,
        "path_id": env.path_id,
        "dt": env.config.dt,
        "substeps": env.config.substeps,
        "env": env.config.to_dict(),
        "reference_knots": env.reference.knots.tolist(),
        "start": start_state,
        "actions": [a.tolist() for a in env.actions],
        "braked": bool(braked),
        "rows": env.trace_rows,
        "setpoints": frame.to_dict(orient="list"),
        "end_state": {
            "p": env.state.p.tolist(),
            "v": env.state.v.tolist(),
            "a": env.state.a.tolist(),
        },
    }


def replay_trace(trace, path, robot):
    """Re-simulate the recorded actions on ``path``; returns the end :class:`KinematicState`."""
    config = EnvConfig.from_dict(trace["env"])
    env = PathTrackingEnv(robot, config)
    start = trace["start"]
    env.reset(path, start=KinematicState(start["p"], start["v"], start["a"]), path_id=trace["path_id"])
    for action in trace["actions"]:
        env.step(np.asarray(action, dtype=np.float64))
    if trace.get("braked"):
        env.brake()
    return env.state


def write_trace(trace, file_path):
    with open(file_path, "w") as f:
        json.dump(trace, f)
    logger.info(f"wrote trace with {len(trace['actions'])} steps to {file_path}")


def read_trace(file_path):
    with open(file_path, "r") as f:
        trace = json.load(f)
    if trace.get("version") != TRACE_VERSION:
        raise EnvError(f"unsupported trace version {trace.get('version')!r} in {file_path}")
    return trace
