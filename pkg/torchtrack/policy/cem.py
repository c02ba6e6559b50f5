"""Cross-entropy method over the flattened policy network weights."""

import hashlib
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
from torch.nn.utils import parameters_to_vector, vector_to_parameters
from tqdm import tqdm

from torchtrack.env.environment import PathTrackingEnv
from torchtrack.errors import TrainingDivergedError
from torchtrack.policy.mlp import TrackingPolicy
from torchtrack.policy.rollout import run_episode
from torchtrack.utils import get_num_workers, parallel_map

logger = logging.getLogger(__name__)

__all__ = ["CEMConfig", "CEMTrainer", "select_elites", "CURVE_COLUMNS"]

CURVE_COLUMNS = ["iteration", "mean_return", "mean_duration", "mean_deviation"]


@dataclass(frozen=True)
class CEMConfig:
    population: int = 16
    elite_fraction: float = 0.25
    init_std: float = 0.05
    min_std: float = 0.002
    paths_per_candidate: int = 4

    def __post_init__(self):
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError(f"elite_fraction must be in (0, 1], got {self.elite_fraction}")
        if self.init_std <= 0 or self.min_std < 0:
            raise ValueError("init_std must be > 0 and min_std >= 0")
        if self.paths_per_candidate < 1:
            raise ValueError("paths_per_candidate must be >= 1")

    @property
    def num_elites(self):
        return max(1, int(round(self.elite_fraction * self.population)))


def _content_key(vector):
    return hashlib.sha256(np.ascontiguousarray(vector, dtype=np.float64).tobytes()).hexdigest()


def select_elites(candidates, returns, num_elites):
    """Indices of the ``num_elites`` best candidates.

    Equal returns are ordered by a hash of the candidate vector, so the elite
    set, and its order, do not depend on the order of ``candidates``.
    """
    keys = [(-float(r), _content_key(c)) for c, r in zip(candidates, returns)]
    order = sorted(range(len(keys)), key=keys.__getitem__)
    return order[:num_elites]


def _candidate_episodes(job):
    robot, env_config, hidden_sizes, vector, normalizer, paths = job
    env = PathTrackingEnv(robot, env_config)
    policy = TrackingPolicy(env.obs_dim, env.action_dim, hidden_sizes)
    vector_to_parameters(torch.as_tensor(vector, dtype=torch.float32), policy.net.parameters())
    results = [
        run_episode(env, policy, normalizer, path, stop_at_path_end=False) for path in paths
    ]
    return (
        float(np.mean([r.episode_return for r in results])),
        float(np.mean([r.duration for r in results])),
        float(np.mean([r.mean_deviation for r in results])),
    )


class CEMTrainer:
    """Diagonal Gaussian search distribution refit to the elite candidates each iteration.

    Candidates of one iteration share the same randomly drawn training paths.
    """

    def __init__(self, robot, env_config, policy, normalizer, paths, config=None, seed=0, num_workers=None):
        if not paths:
            raise ValueError("CEM training needs at least one path")
        self.robot = robot
        self.env_config = env_config
        self.policy = policy
        self.normalizer = normalizer
        self.paths = list(paths)
        self.config = config or CEMConfig()
        self.rng = np.random.default_rng(seed)
        self.num_workers = get_num_workers(num_workers)
        with torch.no_grad():
            self.mean = parameters_to_vector(policy.net.parameters()).double().numpy().copy()
        self.std = np.full_like(self.mean, self.config.init_std)

    def step(self, iteration):
        cfg = self.config
        subset = np.sort(
            self.rng.choice(len(self.paths), size=min(cfg.paths_per_candidate, len(self.paths)), replace=False)
        )
        paths = [self.paths[i] for i in subset]
        noise = self.rng.standard_normal((cfg.population, self.mean.size))
        candidates = self.mean + noise * self.std
        jobs = [
            (self.robot, self.env_config, self.policy.hidden_sizes, c, self.normalizer, paths)
            for c in candidates
        ]
        scores = np.array(parallel_map(_candidate_episodes, jobs, self.num_workers))
        returns = scores[:, 0]
        if not np.all(np.isfinite(returns)):
            raise TrainingDivergedError(
                "CEM candidate returns are not finite",
                {"iteration": iteration, "non_finite": int(np.sum(~np.isfinite(returns)))},
            )
        elites = candidates[select_elites(candidates, returns, cfg.num_elites)]
        self.mean = elites.mean(axis=0)
        self.std = np.maximum(elites.std(axis=0), cfg.min_std)
        with torch.no_grad():
            vector_to_parameters(
                torch.as_tensor(self.mean, dtype=torch.float32), self.policy.net.parameters()
            )
        return {
            "iteration": iteration,
            "mean_return": float(returns.mean()),
            "mean_duration": float(scores[:, 1].mean()),
            "mean_deviation": float(scores[:, 2].mean()),
        }

    def run(self, budget, progress=False):
        """Run ``budget`` iterations; returns the learning curve."""
        rows = []
        iterations = range(int(budget))
        if progress:
            iterations = tqdm(iterations, desc="cem")
        for iteration in iterations:
            row = self.step(iteration)
            logger.info(
                f"cem iteration {iteration}: mean return {row['mean_return']:.4f}, "
                f"duration {row['mean_duration']:.3f} s, deviation {row['mean_deviation']:.4f} rad"
            )
            rows.append(row)
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)
