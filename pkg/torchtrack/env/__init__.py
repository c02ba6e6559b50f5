from torchtrack.env.ball_beam import BallBeamTask, BallState, ball_beam_step, beam_tilt
from torchtrack.env.environment import (
    Observation,
    PathTrackingEnv,
    SwapPolicy,
    prepare_path,
    state_knot_count,
)
from torchtrack.env.reward import (
    RewardBreakdown,
    reward_deviation,
    reward_length,
    reward_task,
    reward_total,
)
from torchtrack.env.trace import export_trace, read_trace, replay_trace, write_trace

__all__ = [
    "BallBeamTask",
    "BallState",
    "ball_beam_step",
    "beam_tilt",
    "Observation",
    "PathTrackingEnv",
    "SwapPolicy",
    "prepare_path",
    "state_knot_count",
    "RewardBreakdown",
    "reward_deviation",
    "reward_length",
    "reward_task",
    "reward_total",
    "export_trace",
    "read_trace",
    "replay_trace",
    "write_trace",
]
