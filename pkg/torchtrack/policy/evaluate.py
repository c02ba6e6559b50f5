"""Evaluation harness.

Every path is tracked by the deterministic policy until the progress reaches
the path end (or the episode terminates), then the robot brakes to rest. The
deviations compare each substep setpoint with the reference point that lies
equally far along the reference path, in joint space and for the Cartesian
position and orientation of the reference point.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from torchtrack.env.environment import PathTrackingEnv
from torchtrack.kinematics import fk_batch, quaternion_angle
from torchtrack.limits import AUDIT_SUBSTEPS, KinematicState, audit_segments, integrate_segment
from torchtrack.policy.rollout import run_episode
from torchtrack.utils import get_num_workers, parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "EvalReport",
    "EPISODE_COLUMNS",
    "DONE_REASONS",
    "AUDIT_EVERY",
    "evaluate",
    "evaluate_episode",
    "deviation_metrics",
]

# one in AUDIT_EVERY episodes is re-simulated at AUDIT_SUBSTEPS substeps
AUDIT_EVERY = 100
DONE_REASONS = ("path_end", "deviation", "ball_dropped", "max_steps")

_METRICS = ("joint_dev", "cart_pos_dev", "cart_ori_dev")
EPISODE_COLUMNS = (
    ["path_id", "generator", "steps", "duration", "done_reason"]
    + [f"{m}_{stat}" for m in _METRICS for stat in ("mean", "max", "final")]
    + ["audited", "max_violation"]
)


@dataclass
class EvalReport:
    """Per-episode rows plus aggregates over all episodes."""

    episodes: pd.DataFrame
    summary: dict = field(default_factory=dict)

    @classmethod
    def from_episodes(cls, episodes):
        return cls(episodes, _summarize(episodes))

    def __len__(self):
        return len(self.episodes)

    def termination_rate(self, reason):
        if not len(self.episodes):
            return 0.0
        return float((self.episodes["done_reason"] == reason).mean())

    def to_csv(self, path):
        self.episodes.to_csv(path, index=False)
        logger.info(f"wrote evaluation report with {len(self)} episodes to {path}")

    def summary_frame(self):
        return pd.DataFrame([self.summary])


def _summarize(episodes):
    n = len(episodes)
    summary = {"episodes": n}
    for column in ["duration"] + [c for c in EPISODE_COLUMNS if c.endswith(("_mean", "_max", "_final"))]:
        summary[f"mean_{column}"] = float(episodes[column].mean()) if n else float("nan")
    for reason in DONE_REASONS:
        summary[f"rate_{reason}"] = float((episodes["done_reason"] == reason).mean()) if n else 0.0
    audited = episodes["audited"].astype(bool) if n else pd.Series([], dtype=bool)
    summary["audited_episodes"] = int(audited.sum())
    summary["worst_violation"] = (
        float(episodes.loc[audited, "max_violation"].max()) if audited.any() else float("nan")
    )
    return summary


def _setpoints(segments, start):
    if not segments:
        return start[None, :]
    return np.vstack([segments[0].p] + [s.p[1:] for s in segments[1:]])


def deviation_metrics(points, path, chain):
    """Arc-length matched ``(joint, position, orientation)`` deviations of ``points`` from ``path``.

    The k-th point is compared with the path point at the arc length the
    points have travelled up to k, clipped to the path length.
    """
    points = np.atleast_2d(points)
    travelled = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    reference = np.atleast_2d(path.eval(np.minimum(travelled, path.total_length)))
    joint = np.linalg.norm(points - reference, axis=1)
    pos, quat = fk_batch(chain, points)
    ref_pos, ref_quat = fk_batch(chain, reference)
    position = np.linalg.norm(pos - ref_pos, axis=1)
    orientation = np.atleast_1d(quaternion_angle(quat, ref_quat))
    return joint, position, orientation


def _audit(segments, start, limits):
    """Worst limit excess of the recorded accelerations re-integrated at audit resolution."""
    state = KinematicState.at_rest(start)
    fine = []
    for segment in segments:
        seg, state = integrate_segment(state, segment.a_end, segment.duration, AUDIT_SUBSTEPS)
        fine.append(seg)
    worst = audit_segments(fine, limits)
    return max(worst.values()) if worst else float("-inf")


def evaluate_episode(robot, env_config, policy, normalizer, record, audit=False):
    """Evaluate one dataset record; returns a row of :data:`EPISODE_COLUMNS`."""
    env = PathTrackingEnv(robot, env_config)
    reference = record.to_path()
    result = run_episode(env, policy, normalizer, reference, brake=True, record=True, path_id=record.id)
    start = reference.eval(0.0)
    points = _setpoints(result.segments, start)
    joint, position, orientation = deviation_metrics(points, reference, robot.chain)
    row = {
        "path_id": record.id,
        "generator": record.generator,
        "steps": result.steps,
        "duration": result.duration,
        "done_reason": result.done_reason,
    }
    for name, values in zip(_METRICS, (joint, position, orientation)):
        row[f"{name}_mean"] = float(values.mean())
        row[f"{name}_max"] = float(values.max())
        row[f"{name}_final"] = float(values[-1])
    row["audited"] = bool(audit)
    row["max_violation"] = _audit(result.segments, start, robot.limits) if audit else float("nan")
    return row


def _evaluate_job(job):
    return evaluate_episode(*job)


def evaluate(policy, normalizer, records, robot, env_config=None, num_workers=None, progress=False):
    """Evaluate the deterministic ``policy`` on every record of a dataset.

    Episodes ``0, AUDIT_EVERY, 2 * AUDIT_EVERY, ...`` are audited against the
    joint limits at :data:`AUDIT_SUBSTEPS` substeps per interval. An empty
    dataset gives an empty report.
    """
    env_config = env_config or robot.env
    records = list(records)
    for record in records:
        if record.dim != robot.num_joints:
            raise ValueError(f"record {record.id} has dim {record.dim}, robot has {robot.num_joints}")
    jobs = [
        (robot, env_config, policy, normalizer, record, i % AUDIT_EVERY == 0)
        for i, record in enumerate(records)
    ]
    if progress:
        jobs = tqdm(jobs, desc="eval")
    rows = parallel_map(_evaluate_job, jobs, get_num_workers(num_workers))
    report = EvalReport.from_episodes(pd.DataFrame(rows, columns=EPISODE_COLUMNS))
    if len(report):
        s = report.summary
        logger.info(
            f"evaluated {s['episodes']} episodes: duration {s['mean_duration']:.3f} s, "
            f"joint deviation {s['mean_joint_dev_mean']:.4f} rad, "
            f"deviation terminations {s['rate_deviation']:.1%}, worst audited violation {s['worst_violation']:.3g}"
        )
    return report
