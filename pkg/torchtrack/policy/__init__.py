from torchtrack.policy.cem import CEMConfig, CEMTrainer, select_elites
from torchtrack.policy.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from torchtrack.policy.evaluate import EPISODE_COLUMNS, EvalReport, evaluate
from torchtrack.policy.mlp import HIDDEN_SIZES, ObservationNormalizer, TrackingPolicy, ValueNetwork
from torchtrack.policy.ppo import PPOConfig, PPOTrainer
from torchtrack.policy.rollout import EpisodeResult, run_episode
from torchtrack.policy.train import ALGORITHMS, TrainingResult, init_policy, train

__all__ = [
    "CEMConfig",
    "CEMTrainer",
    "select_elites",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "EPISODE_COLUMNS",
    "EvalReport",
    "evaluate",
    "HIDDEN_SIZES",
    "ObservationNormalizer",
    "TrackingPolicy",
    "ValueNetwork",
    "PPOConfig",
    "PPOTrainer",
    "EpisodeResult",
    "run_episode",
    "ALGORITHMS",
    "TrainingResult",
    "init_policy",
    "train",
]
