"""Offline time-optimal durations.

``--mode analytic`` times straight single-joint paths against the closed-form
rest-to-rest durations and checks grid refinement. ``--mode dataset`` compares
the offline durations with a trained checkpoint on dataset paths.
"""

import argparse
import logging
from functools import partial

import numpy as np
from bench_utils import Timer, print_table

from torchtrack.config import load_robot_config
from torchtrack.dataset import load_records
from torchtrack.env.environment import PathTrackingEnv
from torchtrack.limits import JointLimits
from torchtrack.policy.checkpoint import load_checkpoint
from torchtrack.policy.rollout import run_episode
from torchtrack.spline import build_path
from torchtrack.topp import backward_forward, duration_report
from torchtrack.utils import get_num_workers, parallel_map

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)


def bang_bang_duration(length, v_max, a_max):
    """Rest-to-rest duration of a single joint without jerk limits."""
    if length * a_max <= v_max**2:
        return 2.0 * np.sqrt(length / a_max)
    return length / v_max + v_max / a_max


def run_analytic(args):
    limits = JointLimits([-100.0], [100.0], [-args.v_max], [args.v_max], [-args.a_max], [args.a_max], [-1e3], [1e3])
    rows = []
    for length in args.lengths:
        path = build_path([[0.0], [length]])
        expected = bang_bang_duration(length, args.v_max, args.a_max)
        with Timer() as timer:
            coarse = backward_forward(path, limits, args.grid).total_duration
        fine = backward_forward(path, limits, 2 * args.grid).total_duration
        rows.append(
            [length, args.grid, expected, coarse, abs(coarse - expected) / expected, abs(coarse - fine) / fine, timer.elapsed]
        )
    return print_table(rows, ["length", "K", "analytic", "topp", "rel_error", "refinement", "time(s)"])


def _policy_duration(robot, ckpt, record):
    env = PathTrackingEnv(robot, ckpt.env_config)
    return run_episode(env, ckpt.policy, ckpt.normalizer, record.to_path(), brake=True).duration


def _topp_duration(grid, limits, record):
    return backward_forward(record.to_path(), limits, grid).total_duration


def run_dataset(args):
    ckpt = load_checkpoint(args.ckpt)
    robot = load_robot_config(args.robot or ckpt.robot)
    records = load_records(args.dataset, dim=robot.num_joints)[: args.paths]
    workers = get_num_workers(args.workers)
    topp = parallel_map(partial(_topp_duration, args.grid, robot.limits), records, workers)
    policy = parallel_map(partial(_policy_duration, robot, ckpt), records, workers)
    report = duration_report([(r.id, args.grid, t, p) for r, t, p in zip(records, topp, policy)])
    print_table(
        [[len(report), float(report["ratio"].mean()), int((report["ratio"] <= 1.0).sum())]],
        ["paths", "mean_ratio", "topp_faster"],
    )
    if args.report:
        report.to_csv(args.report, index=False)
    return report


if __name__ == "__main__":
    parser = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--mode", type=str, default="analytic", choices=("analytic", "dataset"))
    parser.add_argument("--grid", type=int, default=1000, help="number of stages K")
    parser.add_argument("--lengths", type=float, nargs="+", default=[0.25, 1.0, 2.0, 4.0, 8.0])
    parser.add_argument("--v_max", type=float, default=1.0)
    parser.add_argument("--a_max", type=float, default=1.0)
    parser.add_argument("--ckpt", type=str, default=None, help="dataset mode: trained checkpoint")
    parser.add_argument("--dataset", type=str, default=None, help="dataset mode: JSON-lines paths")
    parser.add_argument("--robot", type=str, default=None, help="default: robot named in the checkpoint")
    parser.add_argument("--paths", type=int, default=50)
    parser.add_argument("--report", type=str, default=None, help="optional CSV of the per-path comparison")
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()
    if args.mode == "dataset" and not (args.ckpt and args.dataset):
        parser.error("--mode dataset needs --ckpt and --dataset")
    if args.mode == "analytic":
        run_analytic(args)
    else:
        run_dataset(args)
