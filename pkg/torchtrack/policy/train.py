import logging
from dataclasses import dataclass
from typing import Optional

import pandas as pd

from torchtrack.env.environment import PathTrackingEnv
from torchtrack.policy.cem import CEMConfig, CEMTrainer, CURVE_COLUMNS
from torchtrack.policy.mlp import HIDDEN_SIZES, ObservationNormalizer, TrackingPolicy
from torchtrack.policy.ppo import PPOConfig, PPOTrainer
from torchtrack.utils import derive_seed, seeded_init

logger = logging.getLogger(__name__)

__all__ = ["ALGORITHMS", "TrainingResult", "init_policy", "train"]

ALGORITHMS = ("cem", "ppo")


@dataclass
class TrainingResult:
    policy: TrackingPolicy
    normalizer: ObservationNormalizer
    curve: pd.DataFrame
    algo: str
    seed: int
    env_config: Optional[object] = None


def init_policy(robot, env_config=None, seed=0, hidden_sizes=HIDDEN_SIZES):
    """Untrained policy and the observation normalizer for ``robot`` under ``env_config``."""
    env = PathTrackingEnv(robot, env_config)
    policy = seeded_init(derive_seed(seed, 0), TrackingPolicy, env.obs_dim, env.action_dim, hidden_sizes)
    return policy, ObservationNormalizer.for_env(env)


def train(
    robot,
    paths,
    algo="cem",
    budget=10,
    seed=0,
    env_config=None,
    num_workers=None,
    cem_config=None,
    ppo_config=None,
    hidden_sizes=HIDDEN_SIZES,
    progress=False,
):
    """Train a tracking policy on ``paths`` (CubicPath objects) for ``budget`` iterations.

    ``budget == 0`` returns the initial policy and an empty learning curve.
    Results are reproducible for a fixed ``seed``; the collected episodes do not
    depend on ``num_workers``.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}, expected one of {ALGORITHMS}")
    if not paths:
        raise ValueError("training needs a non-empty dataset")
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    env_config = env_config or robot.env
    policy, normalizer = init_policy(robot, env_config, seed, hidden_sizes)
    logger.info(f"training {algo} on {len(paths)} paths for {budget} iterations (seed {seed})")
    if budget == 0:
        curve = pd.DataFrame(columns=CURVE_COLUMNS)
    elif algo == "cem":
        trainer = CEMTrainer(
            robot, env_config, policy, normalizer, paths, cem_config or CEMConfig(), derive_seed(seed, 1), num_workers
        )
        curve = trainer.run(budget, progress=progress)
    else:
        trainer = PPOTrainer(
            robot, env_config, policy, normalizer, paths, ppo_config or PPOConfig(), derive_seed(seed, 1), num_workers
        )
        curve = trainer.run(budget, progress=progress)
    return TrainingResult(policy, normalizer, curve, algo, int(seed), env_config)
