"""Desk-scale training runs and sweeps.

Trains on random paths of one robot and evaluates on held-out paths:

* ``--sweep none``: one run, compared with the untrained policy;
* ``--sweep beta``: deviation weight beta over ``--values`` with alpha = 1,
  trading traversal time against path deviation;
* ``--sweep knots``: number of state knots in the observation;
* ``--sweep sampling``: distance against curvature based knot sampling;
* ``--sweep gamma``: ball-on-beam task weight gamma over ``--values``; gamma = 0
  ignores the ball, so its drop rate shows what the task reward buys.
"""

import argparse
import logging

import numpy as np
from bench_utils import Timer, print_table

from torchtrack.config import Task, load_robot_config
from torchtrack.dataset import gen_random_paths
from torchtrack.env.environment import PathTrackingEnv
from torchtrack.policy.cem import CEMConfig
from torchtrack.policy.evaluate import evaluate
from torchtrack.policy.rollout import run_episode
from torchtrack.policy.train import init_policy, train
from torchtrack.spline import SamplingStrategy

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=logging.INFO
)


def mean_return(policy, normalizer, robot, env_config, records):
    env = PathTrackingEnv(robot, env_config)
    returns = [
        run_episode(env, policy, normalizer, r.to_path(), stop_at_path_end=False).episode_return
        for r in records
    ]
    return float(np.mean(returns))


def sweep_configs(args, robot):
    base = robot.env
    if args.sweep == "none":
        return [("default", base)]
    if args.sweep == "beta":
        values = args.values or [0.5, 1.0, 2.0]
        return [(f"beta={v:g}", base.replace(reward=base.reward.replace(alpha=1.0, beta=v))) for v in values]
    if args.sweep == "knots":
        values = args.values or [2, 3, 5, 7]
        return [(f"n_knots={int(v)}", base.replace(n_knots=int(v))) for v in values]
    if args.sweep == "gamma":
        values = args.values or [0.0, 1.0]
        return [
            (f"gamma={v:g}", base.replace(task=Task.BALL_BEAM, reward=base.reward.replace(gamma=v)))
            for v in values
        ]
    return [(f"sampling={s.value}", base.replace(sampling=s)) for s in SamplingStrategy]


def run_bench(args):
    robot = load_robot_config(args.robot)
    records = gen_random_paths(robot, args.train_paths + args.test_paths, seed=args.seed, num_workers=args.workers)
    train_records, test_records = records[: args.train_paths], records[args.train_paths :]
    paths = [r.to_path() for r in train_records]
    cem_config = CEMConfig(population=args.population, paths_per_candidate=args.paths_per_candidate)
    print(
        f"Running {args.algo} training on {robot.name} with train_paths={args.train_paths}, "
        f"test_paths={args.test_paths}, budget={args.budget}, sweep={args.sweep}"
    )
    rows = []
    for name, env_config in sweep_configs(args, robot):
        initial, normalizer = init_policy(robot, env_config, seed=args.seed)
        untrained = mean_return(initial, normalizer, robot, env_config, test_records)
        with Timer() as timer:
            result = train(
                robot,
                paths,
                algo=args.algo,
                budget=args.budget,
                seed=args.seed,
                env_config=env_config,
                num_workers=args.workers,
                cem_config=cem_config,
                progress=args.progress,
            )
        trained = mean_return(result.policy, result.normalizer, robot, env_config, test_records)
        report = evaluate(result.policy, result.normalizer, test_records, robot, env_config, args.workers)
        s = report.summary
        rows.append(
            [
                name,
                untrained,
                trained,
                trained / untrained if untrained else float("nan"),
                s["mean_duration"],
                s["mean_joint_dev_mean"],
                s["rate_deviation"],
                s["rate_ball_dropped"],
                timer.elapsed,
            ]
        )
        if args.curve_dir:
            result.curve.to_csv(f"{args.curve_dir}/{args.algo}_{name}.csv", index=False)
    headers = [
        "setting",
        "untrained_return",
        "trained_return",
        "improvement",
        "mean_duration",
        "mean_joint_dev",
        "rate_deviation",
        "rate_ball_dropped",
        "train_time(s)",
    ]
    return print_table(rows, headers)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--robot", type=str, default="planar3")
    parser.add_argument("--algo", type=str, default="cem", choices=("cem", "ppo"))
    parser.add_argument("--sweep", type=str, default="none", choices=("none", "beta", "knots", "sampling", "gamma"))
    parser.add_argument("--values", type=float, nargs="+", default=None, help="sweep values")
    parser.add_argument("--train_paths", type=int, default=200)
    parser.add_argument("--test_paths", type=int, default=100)
    parser.add_argument("--budget", type=int, default=30, help="training iterations")
    parser.add_argument("--population", type=int, default=CEMConfig.population)
    parser.add_argument("--paths_per_candidate", type=int, default=CEMConfig.paths_per_candidate)
    parser.add_argument("--curve_dir", type=str, default=None, help="write learning curves here")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--progress", action="store_true")
    args = parser.parse_args()
    run_bench(args)
