"""Exception hierarchy shared by all torchtrack modules.

The command line maps :class:`ConfigError` to exit code 2 and every other
:class:`TorchTrackError` to exit code 3.
"""

__all__ = [
    "TorchTrackError",
    "ConfigError",
    "LimitViolationError",
    "InfeasibleStateError",
    "EnvError",
    "DatasetError",
    "ToppInfeasibleError",
    "TrainingDivergedError",
]


class TorchTrackError(Exception):
    pass


class ConfigError(TorchTrackError, ValueError):
    """Invalid robot, environment or reward configuration.

    ``field`` is the dotted path of the offending entry, e.g. ``joints[2].v_max``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class LimitViolationError(TorchTrackError, ValueError):
    pass


class InfeasibleStateError(TorchTrackError, RuntimeError):
    pass


class EnvError(TorchTrackError, RuntimeError):
    pass


class DatasetError(TorchTrackError, ValueError):
    pass


class ToppInfeasibleError(TorchTrackError, RuntimeError):
    def __init__(self, stage, message="empty admissible set"):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


class TrainingDivergedError(TorchTrackError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} ({details})" if details else message)
