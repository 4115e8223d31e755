"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value, file, or option combination."""


class ChainError(ConfigError):
    """Malformed robot chain description."""


class ContractError(ValueError):
    """Arguments violate an operation's shape or value contract."""


class PolicyStateError(RuntimeError):
    """Sampling policy reached an unusable state (e.g. all-zero weights)."""


class TrainingError(RuntimeError):
    """Surrogate training diverged; carries the last finite loss seen."""

    def __init__(self, message: str, last_loss: float | None = None):
        super().__init__(message)
        self.last_loss = last_loss
