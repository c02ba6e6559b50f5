"""Robot, environment and reward configuration.

A robot is described by one YAML document::

    name: planar3
    base: {position: [0, 0, 0], orientation: [0, 0, 0, 1]}
    tcp: [0.1, 0.0, 0.0]
    joints:
      - name: shoulder
        axis: [0, -1, 0]
        translation: [0.4, 0, 0]
        limits: {p_min: -2.6, p_max: 2.6, v_min: -1.5, v_max: 1.5,
                 a_min: -8, a_max: 8, j_min: -80, j_max: 80}
    env:
      dt: 0.1
      n_knots: 5
      reward: {alpha: 1.0, beta: 1.0, gamma: 0.0, l_end: 0.1, d_max: 0.4}
      ball_beam: {half_length: 0.3}

Built-in documents live in ``torchtrack/configs`` and are addressed by name.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import yaml

from torchtrack.errors import ConfigError
from torchtrack.kinematics import ChainSpec
from torchtrack.limits import JointLimits
from torchtrack.spline import SamplingStrategy

logger = logging.getLogger(__name__)

__all__ = [
    "Task",
    "RewardConfig",
    "BallBeamConfig",
    "EnvConfig",
    "RobotConfig",
    "builtin_robots",
    "load_robot_config",
    "parse_robot_config",
    "CONFIG_DIR",
]

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")

_LIMIT_KEYS = ("p_min", "p_max", "v_min", "v_max", "a_min", "a_max", "j_min", "j_max")


class Task(Enum):
    NONE = "none"
    BALL_BEAM = "ball_beam"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower().replace("-", "_"))


class _Replaceable:
    def replace(self, **overrides):
        return dataclasses.replace(self, **overrides)


def _require(condition, field_name, message):
    if not condition:
        raise ConfigError(field_name, message)


@dataclass(frozen=True)
class RewardConfig(_Replaceable):
    """Weights of the length, deviation and task rewards and their shape parameters."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0
    l_end: float = 0.1
    d_max: float = 0.4

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            _require(np.isfinite(value) and value >= 0, f"reward.{name}", f"must be >= 0, got {value}")
        _require(self.l_end > 0, "reward.l_end", f"must be > 0, got {self.l_end}")
        _require(self.d_max > 0, "reward.d_max", f"must be > 0, got {self.d_max}")


@dataclass(frozen=True)
class BallBeamConfig(_Replaceable):
    half_length: float = 0.3
    gravity: float = 9.81

    def __post_init__(self):
        _require(self.half_length > 0, "ball_beam.half_length", "must be > 0")
        _require(self.gravity > 0, "ball_beam.gravity", "must be > 0")


@dataclass(frozen=True)
class EnvConfig(_Replaceable):
    """Episode parameters.

    ``termination_deviation`` left as None follows ``2 * reward.d_max`` through
    :attr:`max_deviation`, also after ``replace``. ``knot_spacing``
    sets the arc length (rad) between state knots of long reference paths.
    """

    dt: float = 0.1
    n_knots: int = 5
    sampling: SamplingStrategy = SamplingStrategy.DISTANCE
    knot_spacing: float = 0.25
    reward: RewardConfig = field(default_factory=RewardConfig)
    termination_deviation: Optional[float] = None
    max_steps: int = 200
    substeps: int = 10
    task: Task = Task.NONE
    ball_beam: BallBeamConfig = field(default_factory=BallBeamConfig)

    def __post_init__(self):
        _require(self.dt > 0, "env.dt", f"must be > 0, got {self.dt}")
        _require(int(self.n_knots) >= 2, "env.n_knots", f"must be >= 2, got {self.n_knots}")
        _require(self.knot_spacing > 0, "env.knot_spacing", "must be > 0")
        _require(int(self.max_steps) >= 1, "env.max_steps", "must be >= 1")
        _require(int(self.substeps) >= 1, "env.substeps", "must be >= 1")
        try:
            object.__setattr__(self, "sampling", SamplingStrategy(self.sampling))
        except ValueError:
            raise ConfigError("env.sampling", f"unknown strategy {self.sampling!r}") from None
        try:
            object.__setattr__(self, "task", Task.parse(self.task))
        except ValueError:
            raise ConfigError("env.task", f"unknown task {self.task!r}") from None
        object.__setattr__(self, "n_knots", int(self.n_knots))
        object.__setattr__(self, "max_steps", int(self.max_steps))
        object.__setattr__(self, "substeps", int(self.substeps))
        _require(
            self.termination_deviation is None or self.termination_deviation > 0,
            "env.termination_deviation",
            f"must be > 0, got {self.termination_deviation}",
        )

    @property
    def max_deviation(self):
        """Deviation that ends an episode."""
        if self.termination_deviation is None:
            return 2.0 * self.reward.d_max
        return self.termination_deviation

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["sampling"] = self.sampling.value
        out["task"] = self.task.value
        return out

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        reward = _section(RewardConfig, doc.pop("reward", None) or {}, "env.reward")
        ball_beam = _section(BallBeamConfig, doc.pop("ball_beam", None) or {}, "env.ball_beam")
        return _section(cls, doc, "env", reward=reward, ball_beam=ball_beam)


@dataclass(frozen=True)
class RobotConfig(_Replaceable):
    name: str
    chain: ChainSpec
    limits: JointLimits
    env: EnvConfig
    joint_names: tuple = ()

    def __post_init__(self):
        _require(
            self.chain.num_joints == self.limits.num_joints,
            "joints",
            f"chain has {self.chain.num_joints} joints, limits have {self.limits.num_joints}",
        )

    @property
    def num_joints(self):
        return self.limits.num_joints


def builtin_robots():
    return sorted(f[: -len(".yaml")] for f in os.listdir(CONFIG_DIR) if f.endswith(".yaml"))


def _vector(doc, key, field_name, size, default=None):
    value = doc.get(key, default)
    _require(value is not None, field_name, "is required")
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(field_name, f"expected {size} numbers, got {value!r}") from None
    _require(arr.shape == (size,), field_name, f"expected {size} numbers, got {value!r}")
    _require(bool(np.all(np.isfinite(arr))), field_name, "must be finite")
    return arr


def _mapping(doc, key, field_name):
    value = doc.get(key) or {}
    _require(isinstance(value, dict), field_name, "must be a mapping")
    return value


def _section(cls, doc, prefix, **nested):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - known)
    _require(not unknown, f"{prefix}.{unknown[0]}" if unknown else prefix, "unknown key")
    try:
        return cls(**{**doc, **nested})
    except TypeError as e:
        raise ConfigError(prefix, f"invalid value type: {e}") from None


def parse_robot_config(doc, source="<config>"):
    """Validate a robot document (already parsed from YAML) into a :class:`RobotConfig`.

    Raises:
        ConfigError: naming the offending field, e.g. ``joints[2].limits.v_max``.
    """
    _require(isinstance(doc, dict), source, "robot config must be a mapping")
    name = str(doc.get("name", os.path.splitext(os.path.basename(source))[0]))
    joints = doc.get("joints")
    _require(isinstance(joints, list) and len(joints) >= 1, "joints", "need a non-empty list")

    axes, translations, rows, names = [], [], [], []
    for i, joint in enumerate(joints):
        where = f"joints[{i}]"
        _require(isinstance(joint, dict), where, "must be a mapping")
        names.append(str(joint.get("name", f"joint{i}")))
        axis = _vector(joint, "axis", f"{where}.axis", 3)
        norm = float(np.linalg.norm(axis))
        _require(norm > 0, f"{where}.axis", "must be non-zero")
        axes.append(axis / norm)
        translations.append(_vector(joint, "translation", f"{where}.translation", 3))
        limits = _mapping(joint, "limits", f"{where}.limits")
        row = {}
        for key in _LIMIT_KEYS:
            value = limits.get(key)
            _require(isinstance(value, (int, float)), f"{where}.limits.{key}", "must be a number")
            row[key] = float(value)
        for lo, hi in (("p_min", "p_max"), ("v_min", "v_max"), ("a_min", "a_max"), ("j_min", "j_max")):
            if lo == "p_min":
                _require(row[lo] < row[hi], f"{where}.limits.{hi}", f"must exceed {lo}")
            else:
                _require(row[lo] < 0, f"{where}.limits.{lo}", "must be < 0")
                _require(row[hi] > 0, f"{where}.limits.{hi}", "must be > 0")
        rows.append(row)

    base = _mapping(doc, "base", "base")
    try:
        chain = ChainSpec(
            axes=np.stack(axes),
            translations=np.stack(translations),
            base_position=_vector(base, "position", "base.position", 3, [0.0, 0.0, 0.0]),
            base_orientation=_vector(base, "orientation", "base.orientation", 4, [0.0, 0.0, 0.0, 1.0]),
            tcp=_vector(doc, "tcp", "tcp", 3, [0.0, 0.0, 0.0]),
        )
    except ValueError as e:
        raise ConfigError("base", str(e)) from None

    env_doc = _mapping(doc, "env", "env")
    _mapping(env_doc, "reward", "env.reward")
    _mapping(env_doc, "ball_beam", "env.ball_beam")
    env = EnvConfig.from_dict(env_doc)
    return RobotConfig(
        name=name,
        chain=chain,
        limits=JointLimits.from_joints(rows),
        env=env,
        joint_names=tuple(names),
    )


def load_robot_config(source):
    """Load a robot by built-in name (``planar3``, ``iiwa7``) or YAML file path."""
    path = str(source)
    if not os.path.exists(path) and path in builtin_robots():
        path = os.path.join(CONFIG_DIR, f"{path}.yaml")
    try:
        with open(path, "r") as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError("robot", f"no such file or built-in robot: {source}") from None
    except yaml.YAMLError as e:
        raise ConfigError("robot", f"invalid YAML in {source}: {e}") from None
    config = parse_robot_config(doc, path)
    logger.debug(f"loaded robot {config.name} with {config.num_joints} joints from {path}")
    return config
