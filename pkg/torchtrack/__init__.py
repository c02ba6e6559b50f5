from torchtrack.config import EnvConfig, RewardConfig, RobotConfig, load_robot_config
from torchtrack.errors import TorchTrackError
from torchtrack.limits import JointLimits, KinematicState, SafeActionSpace, feasible_range
from torchtrack.spline import CubicPath, build_path

__version__ = "0.1.0"

__all__ = [
    "CubicPath",
    "EnvConfig",
    "JointLimits",
    "KinematicState",
    "RewardConfig",
    "RobotConfig",
    "SafeActionSpace",
    "TorchTrackError",
    "build_path",
    "feasible_range",
    "load_robot_config",
]
