"""Command line entry points.

Exit codes: 0 on success, 2 for invalid configuration or arguments, 3 for
any other failure.
"""

import argparse
import logging
import sys
from functools import partial

import numpy as np
from tabulate import tabulate

from torchtrack import __version__
from torchtrack.config import Task, load_robot_config
from torchtrack.dataset import (
    DEFAULT_STEPS_PER_PATH,
    DEFAULT_WAYPOINTS_PER_PATH,
    GENERATORS,
    gen_random_paths,
    gen_waypoint_paths,
    load_records,
    save_records,
    split_records,
)
from torchtrack.env.environment import PathTrackingEnv
from torchtrack.env.trace import export_trace, write_trace
from torchtrack.errors import ConfigError, ToppInfeasibleError, TorchTrackError
from torchtrack.policy.cem import CEMConfig
from torchtrack.policy.checkpoint import load_checkpoint, save_checkpoint
from torchtrack.policy.evaluate import evaluate
from torchtrack.policy.ppo import PPOConfig
from torchtrack.policy.rollout import run_episode
from torchtrack.policy.train import ALGORITHMS, train
from torchtrack.spline import SamplingStrategy
from torchtrack.topp import MIN_STAGES, backward_forward, duration_report
from torchtrack.utils import NUM_WORKERS_ENV, get_num_workers, parallel_map

logger = logging.getLogger("torchtrack")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _env_config(robot, args):
    """Robot env defaults with the command line overrides applied."""
    env = robot.env
    reward = {k: getattr(args, k) for k in ("alpha", "beta", "gamma") if getattr(args, k, None) is not None}
    if reward:
        env = env.replace(reward=env.reward.replace(**reward))
    overrides = {}
    if getattr(args, "task", None) is not None:
        try:
            overrides["task"] = Task.parse(args.task)
        except ValueError:
            raise ConfigError("task", f"unknown task {args.task!r}") from None
    if getattr(args, "n_knots", None) is not None:
        overrides["n_knots"] = args.n_knots
    if getattr(args, "sampling", None) is not None:
        overrides["sampling"] = SamplingStrategy(args.sampling)
    return env.replace(**overrides) if overrides else env


def _check_dims(robot, env_config, ckpt):
    env = PathTrackingEnv(robot, env_config)
    if env.obs_dim != ckpt.obs_dim:
        raise ConfigError(
            "ckpt",
            f"checkpoint expects {ckpt.obs_dim} observation entries, "
            f"robot {robot.name} with task {env_config.task.value} gives {env.obs_dim}",
        )


def _load_checkpoint_robot(args):
    ckpt = load_checkpoint(args.ckpt)
    robot = load_robot_config(args.robot or ckpt.robot)
    _check_dims(robot, ckpt.env_config, ckpt)
    return ckpt, robot


def cmd_gen_dataset(args):
    robot = load_robot_config(args.robot)
    if args.count < 1:
        raise ConfigError("count", f"must be >= 1, got {args.count}")
    workers = get_num_workers(args.workers)
    if args.kind == "random":
        records = gen_random_paths(robot, args.count, args.steps_per_path, args.seed, workers, args.progress)
        size = {"steps_per_path": args.steps_per_path}
    else:
        records = gen_waypoint_paths(robot, args.count, args.waypoints, args.seed, workers, args.progress)
        size = {"waypoints_per_path": args.waypoints}
    manifest = {"robot": robot.name, "kind": args.kind, "seed": args.seed, "dt": robot.env.dt, **size}
    save_records(records, args.out, manifest)
    return EXIT_OK


def cmd_train(args):
    robot = load_robot_config(args.robot)
    env_config = _env_config(robot, args)
    records = load_records(args.dataset, dim=robot.num_joints)
    if not records:
        raise ConfigError("dataset", f"{args.dataset} holds no paths")
    paths = [r.to_path() for r in records]
    cem_config = CEMConfig(population=args.population, paths_per_candidate=args.paths_per_candidate)
    result = train(
        robot,
        paths,
        algo=args.algo,
        budget=args.budget,
        seed=args.seed,
        env_config=env_config,
        num_workers=args.workers,
        cem_config=cem_config,
        ppo_config=PPOConfig(),
        progress=args.progress,
    )
    save_checkpoint(args.out, result.policy, result.normalizer, robot.name, env_config, args.algo, args.seed)
    curve_path = args.curve or f"{args.out}.curve.csv"
    result.curve.to_csv(curve_path, index=False)
    logger.info(f"wrote learning curve to {curve_path}")
    final = result.curve["mean_return"].iloc[-1] if len(result.curve) else float("nan")
    print(f"final mean return: {final:.6f}")
    return EXIT_OK


def cmd_eval(args):
    ckpt, robot = _load_checkpoint_robot(args)
    records = load_records(args.dataset, dim=robot.num_joints)
    report = evaluate(
        ckpt.policy, ckpt.normalizer, records, robot, ckpt.env_config, args.workers, args.progress
    )
    report.to_csv(args.report)
    summary = {k: v for k, v in report.summary.items() if not k.endswith(("_max", "_final"))}
    print(tabulate(list(summary.items()), headers=["metric", "value"], floatfmt=".4g"))
    return EXIT_OK


def _topp_row(K, limits, record):
    try:
        duration = backward_forward(record.to_path(), limits, K).total_duration
    except ToppInfeasibleError as e:
        logger.warning(f"{record.id}: {e}")
        duration = float("nan")
    return duration


def _policy_duration(robot, ckpt, record):
    env = PathTrackingEnv(robot, ckpt.env_config)
    result = run_episode(env, ckpt.policy, ckpt.normalizer, record.to_path(), brake=True, path_id=record.id)
    return result.duration


def cmd_topp(args):
    if args.grid < MIN_STAGES:
        raise ConfigError("grid", f"must be >= {MIN_STAGES}, got {args.grid}")
    if args.ckpt:
        ckpt, robot = _load_checkpoint_robot(args)
    else:
        ckpt, robot = None, load_robot_config(args.robot)
    records = load_records(args.dataset, dim=robot.num_joints)
    workers = get_num_workers(args.workers)
    topp = parallel_map(partial(_topp_row, args.grid, robot.limits), records, workers)
    if ckpt is not None:
        policy = parallel_map(partial(_policy_duration, robot, ckpt), records, workers)
    else:
        policy = [None] * len(records)
    report = duration_report(
        [(r.id, args.grid, t, p) for r, t, p in zip(records, topp, policy)]
    )
    report.to_csv(args.report, index=False)
    logger.info(f"wrote TOPP report with {len(report)} paths to {args.report}")
    if len(report):
        print(
            tabulate(
                [
                    ["paths", len(report)],
                    ["mean duration_topp", float(np.nanmean(report["duration_topp"]))],
                    ["mean ratio", float(report["ratio"].mean())],
                ],
                headers=["metric", "value"],
                floatfmt=".4g",
            )
        )
    return EXIT_OK


def cmd_trace(args):
    ckpt, robot = _load_checkpoint_robot(args)
    records = {r.id: r for r in load_records(args.dataset, dim=robot.num_joints)}
    if args.path_id not in records:
        raise ConfigError("path-id", f"no path {args.path_id!r} in {args.dataset}")
    env = PathTrackingEnv(robot, ckpt.env_config, record_trace=True)
    run_episode(
        env, ckpt.policy, ckpt.normalizer, records[args.path_id].to_path(), brake=True, path_id=args.path_id
    )
    write_trace(export_trace(env, braked=True), args.out)
    return EXIT_OK


def cmd_split(args):
    if not 0.0 < args.ratio < 1.0:
        raise ConfigError("ratio", f"must be in (0, 1), got {args.ratio}")
    records = load_records(args.dataset)
    train_records, test_records = split_records(records, args.ratio, args.seed)
    save_records(train_records, args.train)
    save_records(test_records, args.test)
    return EXIT_OK


def _add_workers(parser):
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"worker processes (default: ${NUM_WORKERS_ENV} or 1)",
    )
    parser.add_argument("--progress", action="store_true", help="show progress bars")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="torchtrack",
        description="Jerk-limited path tracking: datasets, training, evaluation and TOPP comparison.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen-dataset", help="generate a reference path dataset", formatter_class=fmt)
    p.add_argument("--robot", required=True, help="built-in robot name or YAML file")
    p.add_argument("--kind", choices=GENERATORS, default="random")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps-per-path", type=int, default=DEFAULT_STEPS_PER_PATH, help="random paths only")
    p.add_argument("--waypoints", type=int, default=DEFAULT_WAYPOINTS_PER_PATH, help="waypoint paths only")
    p.add_argument("--out", required=True, help="JSON-lines output file")
    _add_workers(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train a tracking policy", formatter_class=fmt)
    p.add_argument("--robot", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--algo", choices=ALGORITHMS, default="cem")
    p.add_argument("--task", choices=("none", "ball-beam"), default=None, help="default: robot config")
    p.add_argument("--budget", type=int, default=10, help="training iterations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=None, help="path length reward weight")
    p.add_argument("--beta", type=float, default=None, help="path deviation reward weight")
    p.add_argument("--gamma", type=float, default=None, help="task reward weight")
    p.add_argument("--n-knots", type=int, default=None, help="state knots in the observation")
    p.add_argument("--sampling", choices=[s.value for s in SamplingStrategy], default=None)
    p.add_argument("--population", type=int, default=CEMConfig.population, help="CEM population")
    p.add_argument("--paths-per-candidate", type=int, default=CEMConfig.paths_per_candidate)
    p.add_argument("--out", required=True, help="checkpoint file")
    p.add_argument("--curve", default=None, help="learning curve CSV (default: <out>.curve.csv)")
    _add_workers(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset", formatter_class=fmt)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--robot", default=None, help="default: robot named in the checkpoint")
    p.add_argument("--report", required=True, help="per-episode CSV report")
    _add_workers(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("topp", help="time-optimal durations of dataset paths", formatter_class=fmt)
    p.add_argument("--dataset", required=True)
    p.add_argument("--robot", default=None, help="required without --ckpt")
    p.add_argument("--grid", type=int, default=1000, help="number of stages K")
    p.add_argument("--ckpt", default=None, help="also time the policy on every path")
    p.add_argument("--report", required=True)
    _add_workers(p)
    p.set_defaults(func=cmd_topp)

    p = sub.add_parser("trace", help="export a step trace of one path", formatter_class=fmt)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--path-id", required=True)
    p.add_argument("--robot", default=None, help="default: robot named in the checkpoint")
    p.add_argument("--out", required=True, help="trace JSON file")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("split", help="split a dataset into train and test files", formatter_class=fmt)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ratio", type=float, default=0.8, help="share of training paths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_split)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format=LOG_FORMAT, level=logging.DEBUG if args.verbose else logging.INFO)
    if args.command == "topp" and not args.ckpt and not args.robot:
        parser.error("topp needs --robot or --ckpt")
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except (TorchTrackError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except ValueError as e:
        logger.error(f"invalid argument: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
