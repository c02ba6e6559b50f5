import numpy as np
import torch
import torch.nn as nn

__all__ = [
    "HIDDEN_SIZES",
    "ObservationNormalizer",
    "TrackingPolicy",
    "ValueNetwork",
    "mlp",
]

HIDDEN_SIZES = (256, 128)


def mlp(in_features, hidden_sizes, out_features, zero_last=False):
    layers = []
    width = in_features
    for size in hidden_sizes:
        layers += [nn.Linear(width, size), nn.Tanh()]
        width = size
    last = nn.Linear(width, out_features)
    if zero_last:
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)
    layers.append(last)
    return nn.Sequential(*layers)


class ObservationNormalizer:
    """Affine scaling of flattened observations to roughly ``[-1, 1]``.

    Positions are centered in and scaled by the position range, velocities and
    accelerations by their limits, path lengths by the arc length a full knot
    window spans.
    """

    def __init__(self, center, scale):
        self.center = np.asarray(center, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)
        if self.center.shape != self.scale.shape or np.any(self.scale <= 0):
            raise ValueError("center and scale must have equal shapes and positive scales")

    @classmethod
    def for_env(cls, env):
        limits, cfg = env.limits, env.config
        mid = 0.5 * (limits.p_max + limits.p_min)
        half = 0.5 * (limits.p_max - limits.p_min)
        v_scale = np.maximum(-limits.v_min, limits.v_max)
        a_scale = np.maximum(-limits.a_min, limits.a_max)
        window = cfg.knot_spacing * (cfg.n_knots - 1)
        center = [np.tile(mid, cfg.n_knots), [0.0, 0.0], mid, np.zeros_like(mid), np.zeros_like(mid)]
        scale = [np.tile(half, cfg.n_knots), [window, window], half, v_scale, a_scale]
        if env.task is not None:
            center.append(np.zeros(env.task.feedback_dim))
            scale.append(env.task.scale())
        return cls(np.concatenate(center), np.concatenate(scale))

    @property
    def dim(self):
        return self.center.size

    def __call__(self, obs):
        if not isinstance(obs, np.ndarray):
            obs = obs.flatten()
        flat = np.asarray(obs, dtype=np.float64)
        if flat.shape[-1] != self.dim:
            raise ValueError(f"observation has {flat.shape[-1]} entries, expected {self.dim}")
        return (flat - self.center) / self.scale

    def state_dict(self):
        return {"center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_state_dict(cls, state):
        return cls(state["center"], state["scale"])


class TrackingPolicy(nn.Module):
    """Gaussian policy squashed by tanh, one action per joint.

    The last layer starts at zero so the initial deterministic policy outputs 0
    (the midpoint of every feasible acceleration range).
    """

    def __init__(self, obs_dim, action_dim, hidden_sizes=HIDDEN_SIZES, init_log_std=-0.5):
        super().__init__()
        self.obs_dim = int(obs_dim)
        self.action_dim = int(action_dim)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.net = mlp(self.obs_dim, self.hidden_sizes, self.action_dim, zero_last=True)
        self.log_std = nn.Parameter(torch.full((self.action_dim,), float(init_log_std)))

    def forward(self, x):
        """Pre-squash mean of the action distribution."""
        return self.net(x)

    def _as_tensor(self, obs):
        x = torch.as_tensor(np.asarray(obs, dtype=np.float32))
        if x.shape[-1] != self.obs_dim:
            raise ValueError(f"observation has {x.shape[-1]} entries, policy expects {self.obs_dim}")
        return x

    @torch.no_grad()
    def act(self, obs, stochastic=False, generator=None):
        """Action in ``[-1, 1]`` for a normalized observation vector."""
        mean = self(self._as_tensor(obs))
        if stochastic:
            noise = torch.randn(mean.shape, generator=generator)
            mean = mean + noise * self.log_std.exp()
        return torch.tanh(mean).double().numpy()

    def distribution(self, x):
        mean = self(x)
        std = self.log_std.clamp(-20.0, 2.0).exp().expand_as(mean)
        return torch.distributions.Normal(mean, std)

    @torch.no_grad()
    def sample(self, obs, generator=None):
        """Returns ``(action, pre_squash, log_prob)`` for PPO rollouts."""
        dist = self.distribution(self._as_tensor(obs))
        pre = dist.mean + dist.stddev * torch.randn(dist.mean.shape, generator=generator)
        return torch.tanh(pre).double().numpy(), pre, dist.log_prob(pre).sum(-1)


class ValueNetwork(nn.Module):
    def __init__(self, obs_dim, hidden_sizes=HIDDEN_SIZES):
        super().__init__()
        self.net = mlp(int(obs_dim), tuple(hidden_sizes), 1)

    def forward(self, x):
        return self.net(x).squeeze(-1)
