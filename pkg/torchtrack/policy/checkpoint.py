"""Versioned policy checkpoints.

A checkpoint is a ``torch.save`` of a dict holding only primitives and
tensors, so it loads with ``weights_only=True``. Readers accept any
checkpoint whose format shares their major version.
"""

import logging
import pickle

import torch
from packaging import version

from torchtrack.config import EnvConfig
from torchtrack.errors import TorchTrackError
from torchtrack.policy.mlp import ObservationNormalizer, TrackingPolicy

logger = logging.getLogger(__name__)

__all__ = ["FORMAT_VERSION", "Checkpoint", "save_checkpoint", "load_checkpoint"]

FORMAT_VERSION = "1.0"

_REQUIRED = (
    "format_version",
    "obs_dim",
    "action_dim",
    "hidden_sizes",
    "robot",
    "env_config",
    "state_dict",
    "normalizer",
)


class Checkpoint:
    def __init__(self, policy, normalizer, robot, env_config, algo=None, seed=None, metadata=None):
        self.policy = policy
        self.normalizer = normalizer
        self.robot = robot
        self.env_config = env_config
        self.algo = algo
        self.seed = seed
        self.metadata = dict(metadata or {})

    @property
    def obs_dim(self):
        return self.policy.obs_dim

    @property
    def task(self):
        return self.env_config.task.value


def save_checkpoint(path, policy, normalizer, robot_name, env_config, algo=None, seed=None):
    payload = {
        "format_version": FORMAT_VERSION,
        "obs_dim": policy.obs_dim,
        "action_dim": policy.action_dim,
        "hidden_sizes": list(policy.hidden_sizes),
        "task": env_config.task.value,
        "robot": robot_name,
        "env_config": env_config.to_dict(),
        "algo": algo,
        "seed": seed,
        "state_dict": policy.state_dict(),
        "normalizer": normalizer.state_dict(),
    }
    torch.save(payload, path)
    logger.info(f"wrote checkpoint ({algo}, obs_dim {policy.obs_dim}) to {path}")


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        TorchTrackError: unreadable file, missing fields or an incompatible format version.
    """
    try:
        payload = torch.load(path, weights_only=True)
    except (RuntimeError, EOFError, ValueError, pickle.UnpicklingError) as e:
        raise TorchTrackError(f"cannot read checkpoint {path}: {e}") from None
    if not isinstance(payload, dict):
        raise TorchTrackError(f"{path} is not a torchtrack checkpoint")
    missing = [key for key in _REQUIRED if key not in payload]
    if missing:
        raise TorchTrackError(f"{path}: checkpoint lacks {', '.join(missing)}")
    found = version.parse(str(payload["format_version"]))
    if found.major != version.parse(FORMAT_VERSION).major:
        raise TorchTrackError(
            f"{path}: checkpoint format {found} is not compatible with {FORMAT_VERSION}"
        )
    policy = TrackingPolicy(payload["obs_dim"], payload["action_dim"], payload["hidden_sizes"])
    policy.load_state_dict(payload["state_dict"])
    policy.eval()
    normalizer = ObservationNormalizer.from_state_dict(payload["normalizer"])
    if normalizer.dim != policy.obs_dim:
        raise TorchTrackError(
            f"{path}: normalizer has {normalizer.dim} entries, policy expects {policy.obs_dim}"
        )
    return Checkpoint(
        policy,
        normalizer,
        payload["robot"],
        EnvConfig.from_dict(payload["env_config"]),
        algo=payload.get("algo"),
        seed=payload.get("seed"),
        metadata={"format_version": str(found)},
    )
