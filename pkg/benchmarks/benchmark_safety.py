"""Constraint compliance of random-action rollouts.

Every rollout starts at rest, applies uniformly random normalized actions and
brakes at the end. All segments are integrated at the audit resolution and
checked against the joint limits, including the exact in-interval extrema.

    python benchmark_safety.py --robot iiwa7 --episodes 1000
"""

import argparse
import logging
from functools import partial

from bench_utils import Timer, print_table, random_action_episode, seeds

from torchtrack.config import load_robot_config
from torchtrack.limits import AUDIT_SUBSTEPS
from torchtrack.utils import get_num_workers, parallel_map

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)


def run_bench(args):
    robot = load_robot_config(args.robot)
    dt = args.dt or robot.env.dt
    print(
        f"Running safety benchmark on {robot.name} with episodes={args.episodes}, steps={args.steps}, "
        f"dt={dt}, substeps={args.substeps}"
    )
    fn = partial(
        random_action_episode,
        robot.limits,
        dt,
        args.steps,
        substeps=args.substeps,
        brake_every=args.brake_every,
    )
    with Timer() as timer:
        results = parallel_map(fn, seeds(args.seed, args.episodes), get_num_workers(args.workers))
    worst = max(r[0] for r in results)
    rows = [
        [
            robot.name,
            args.episodes,
            worst,
            sum(r[0] > args.tol for r in results),
            sum(r[1] for r in results),
            sum(r[2] for r in results),
            timer.elapsed,
        ]
    ]
    headers = ["robot", "episodes", "worst_excess", "violating", "brake_failures", "empty_ranges", "time(s)"]
    return print_table(rows, headers)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--robot", type=str, default="iiwa7")
    parser.add_argument("--episodes", type=int, default=1000)
    parser.add_argument("--steps", type=int, default=100)
    parser.add_argument("--dt", type=float, default=None, help="default: robot config")
    parser.add_argument("--substeps", type=int, default=AUDIT_SUBSTEPS)
    parser.add_argument(
        "--brake_every", type=int, default=10, help="also brake from every n-th visited state (0: never)"
    )
    parser.add_argument("--tol", type=float, default=1e-9, help="allowed limit excess")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()
    run_bench(args)
