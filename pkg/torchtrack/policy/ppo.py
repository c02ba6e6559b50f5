"""Clipped-surrogate policy optimization with a value baseline.

Episodes of one iteration are collected in parallel; every episode draws its
exploration noise from its own generator seeded from ``(seed, episode index)``
so the collected batch does not depend on the worker count.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from tqdm import tqdm

from torchtrack.env.environment import PathTrackingEnv
from torchtrack.errors import TrainingDivergedError
from torchtrack.policy.cem import CURVE_COLUMNS
from torchtrack.policy.mlp import ValueNetwork
from torchtrack.policy.rollout import run_episode
from torchtrack.utils import derive_seed, get_num_workers, parallel_map, seeded_generators, seeded_init

logger = logging.getLogger(__name__)

__all__ = ["PPOConfig", "PPOTrainer", "gae"]


@dataclass(frozen=True)
class PPOConfig:
    lr: float = 3e-4
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    episodes_per_iteration: int = 16
    epochs: int = 10
    minibatch_size: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if self.lr <= 0 or self.clip <= 0:
            raise ValueError("lr and clip must be positive")
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lam must be in [0, 1]")
        if min(self.episodes_per_iteration, self.epochs, self.minibatch_size) < 1:
            raise ValueError("episodes_per_iteration, epochs and minibatch_size must be >= 1")


def gae(rewards, values, gamma, lam):
    """Advantages and returns of one episode that terminates after its last step."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    advantages = np.zeros_like(rewards)
    running = 0.0
    next_value = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def _collect_episode(job):
    robot, env_config, policy, normalizer, path, episode_seed = job
    env = PathTrackingEnv(robot, env_config)
    _, generator = seeded_generators(episode_seed)
    result = run_episode(
        env,
        policy,
        normalizer,
        path,
        stochastic=True,
        generator=generator,
        stop_at_path_end=False,
        record=True,
    )
    # segments are not needed for the update
    result.segments = []
    return result


class PPOTrainer:
    def __init__(self, robot, env_config, policy, normalizer, paths, config=None, seed=0, num_workers=None):
        if not paths:
            raise ValueError("PPO training needs at least one path")
        self.robot = robot
        self.env_config = env_config
        self.policy = policy
        self.normalizer = normalizer
        self.paths = list(paths)
        self.config = config or PPOConfig()
        self.seed = int(seed)
        self.rng, self.generator = seeded_generators(derive_seed(seed, 0))
        self.num_workers = get_num_workers(num_workers)
        self.value = seeded_init(derive_seed(seed, 1), ValueNetwork, policy.obs_dim, policy.hidden_sizes)
        self.optimizer = torch.optim.Adam(
            list(self.policy.parameters()) + list(self.value.parameters()), lr=self.config.lr
        )
        self._episodes = 0

    def collect(self):
        cfg = self.config
        picks = self.rng.integers(0, len(self.paths), size=cfg.episodes_per_iteration)
        jobs = []
        for i in picks:
            jobs.append(
                (
                    self.robot,
                    self.env_config,
                    self.policy,
                    self.normalizer,
                    self.paths[int(i)],
                    derive_seed(self.seed, 2 + self._episodes),
                )
            )
            self._episodes += 1
        return parallel_map(_collect_episode, jobs, self.num_workers)

    def _batch(self, episodes):
        cfg = self.config
        obs = torch.as_tensor(np.concatenate([np.stack(e.observations) for e in episodes]), dtype=torch.float32)
        pre = torch.cat([torch.stack(e.pre_actions) for e in episodes])
        old_log_prob = torch.cat([torch.stack(e.log_probs) for e in episodes])
        with torch.no_grad():
            values = self.value(obs).double().numpy()
        advantages, returns = [], []
        start = 0
        for e in episodes:
            stop = start + len(e.rewards)
            adv, ret = gae(e.rewards, values[start:stop], cfg.gamma, cfg.lam)
            advantages.append(adv)
            returns.append(ret)
            start = stop
        advantages = torch.as_tensor(np.concatenate(advantages), dtype=torch.float32)
        returns = torch.as_tensor(np.concatenate(returns), dtype=torch.float32)
        if advantages.numel() > 1:
            advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        return obs, pre, old_log_prob, advantages, returns

    def update(self, episodes, iteration):
        cfg = self.config
        obs, pre, old_log_prob, advantages, returns = self._batch(episodes)
        n = obs.shape[0]
        params = list(self.policy.parameters()) + list(self.value.parameters())
        for _ in range(cfg.epochs):
            order = torch.randperm(n, generator=self.generator)
            for start in range(0, n, cfg.minibatch_size):
                idx = order[start : start + cfg.minibatch_size]
                dist = self.policy.distribution(obs[idx])
                log_prob = dist.log_prob(pre[idx]).sum(-1)
                ratio = torch.exp(log_prob - old_log_prob[idx])
                surrogate = torch.min(
                    ratio * advantages[idx],
                    torch.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantages[idx],
                )
                policy_loss = -surrogate.mean()
                value_loss = F.mse_loss(self.value(obs[idx]), returns[idx])
                entropy = dist.entropy().sum(-1).mean()
                loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
                if not torch.isfinite(loss):
                    raise TrainingDivergedError(
                        "PPO loss is not finite",
                        {
                            "iteration": iteration,
                            "policy_loss": float(policy_loss),
                            "value_loss": float(value_loss),
                            "max_ratio": float(ratio.max()),
                            "log_std": self.policy.log_std.detach().tolist(),
                        },
                    )
                self.optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(params, cfg.max_grad_norm)
                self.optimizer.step()

    def step(self, iteration):
        episodes = self.collect()
        self.update(episodes, iteration)
        return {
            "iteration": iteration,
            "mean_return": float(np.mean([e.episode_return for e in episodes])),
            "mean_duration": float(np.mean([e.duration for e in episodes])),
            "mean_deviation": float(np.mean([e.mean_deviation for e in episodes])),
        }

    def run(self, budget, progress=False):
        rows = []
        iterations = range(int(budget))
        if progress:
            iterations = tqdm(iterations, desc="ppo")
        for iteration in iterations:
            row = self.step(iteration)
            logger.info(
                f"ppo iteration {iteration}: mean return {row['mean_return']:.4f}, "
                f"duration {row['mean_duration']:.3f} s, deviation {row['mean_deviation']:.4f} rad"
            )
            rows.append(row)
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)
