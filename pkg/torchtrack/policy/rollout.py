from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

__all__ = ["EpisodeResult", "run_episode"]


@dataclass
class EpisodeResult:
    """Outcome of one episode.

    ``done_reason`` is the environment's termination reason or ``"path_end"``
    when the episode was cut at the end of the reference path.
    """

    episode_return: float
    steps: int
    duration: float
    mean_deviation: float
    done_reason: Optional[str]
    segments: List = field(default_factory=list)
    observations: List = field(default_factory=list)
    pre_actions: List = field(default_factory=list)
    log_probs: List = field(default_factory=list)
    rewards: List = field(default_factory=list)


def run_episode(
    env,
    policy,
    normalizer,
    path,
    stochastic=False,
    generator=None,
    stop_at_path_end=True,
    brake=False,
    record=False,
    path_id=None,
):
    """Run ``policy`` on ``path`` until the episode ends.

    With ``stop_at_path_end`` the episode is also cut once the progress reaches
    the path end. ``brake`` brings the robot to rest once the episode ends and
    counts the braking time in ``duration``. ``record`` keeps segments, and with ``stochastic``
    also the transitions needed for policy-gradient updates.
    """
    obs = env.reset(path, path_id=path_id)
    result = EpisodeResult(0.0, 0, 0.0, 0.0, None)
    deviations = []
    done = False
    while not done:
        x = normalizer(obs)
        if stochastic:
            action, pre, log_prob = policy.sample(x, generator=generator)
        else:
            action = policy.act(x)
        obs, reward, done, info = env.step(action)
        result.episode_return += reward.total
        deviations.append(reward.d)
        if record:
            result.segments.append(info["segment"])
            if stochastic:
                result.observations.append(x)
                result.pre_actions.append(pre)
                result.log_probs.append(log_prob)
                result.rewards.append(reward.total)
        reached_end = stop_at_path_end and info["at_path_end"]
        if done:
            result.done_reason = info["done_reason"]
        elif reached_end:
            result.done_reason = "path_end"
            break
    if brake:
        segments = env.brake()
        if record:
            result.segments.extend(segments)
    result.steps = env.steps
    result.duration = env.time
    result.mean_deviation = float(np.mean(deviations)) if deviations else 0.0
    return result
