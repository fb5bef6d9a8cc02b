class ConfigurationError(ValueError):
    """Raised when a configuration or an input violates a documented precondition."""


class TrainingDivergence(RuntimeError):
    """Raised when a training step produces a non-finite loss or gradient."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
