from dataclasses import dataclass

import numpy as np

__all__ = [
    "RewardBreakdown",
    "reward_length",
    "reward_deviation",
    "reward_task",
    "reward_total",
]


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-step reward components.

    ``l`` is the arc length (rad) generated by the step, ``d`` the mean
    deviation (rad) from the reference path over the step.
    """

    r_l: float
    r_d: float
    r_s: float
    total: float
    l: float = 0.0
    d: float = 0.0


def _clip01(x):
    return float(min(max(x, 0.0), 1.0))


def reward_length(l, l_state, cfg):
    """Quadratic rise to 1 at ``l == l_state``, quadratic fall to 0 at ``l_state + l_end``.

    With ``l_state == 0`` only the falling branch remains, peaking at ``l == 0``.
    """
    l = max(float(l), 0.0)
    l_state = max(float(l_state), 0.0)
    if l_state > 0.0 and l <= l_state:
        return _clip01((l / l_state) ** 2)
    end = l_state + cfg.l_end
    if l <= end:
        return _clip01(((l - end) / cfg.l_end) ** 2)
    return 0.0


def reward_deviation(d, cfg):
    d = max(float(d), 0.0)
    if d > cfg.d_max:
        return 0.0
    return _clip01(((d - cfg.d_max) / cfg.d_max) ** 2)


def reward_task(distance, limit):
    """1 at ``distance == 0`` falling quadratically to 0 at ``limit``."""
    distance = abs(float(distance))
    if distance > limit:
        return 0.0
    return _clip01(((distance - limit) / limit) ** 2)


def reward_total(parts, cfg, l=0.0, d=0.0):
    r_l, r_d, r_s = (float(np.clip(p, 0.0, 1.0)) for p in parts)
    total = cfg.alpha * r_l + cfg.beta * r_d + cfg.gamma * r_s
    return RewardBreakdown(r_l=r_l, r_d=r_d, r_s=r_s, total=max(total, 0.0), l=float(l), d=float(d))
