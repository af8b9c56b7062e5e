"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration; carries a dotted field path when available."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DivergedError(RuntimeError):
    """An iteration produced a non-finite or unbounded state.

    Carries the iteration index at which divergence was detected and the
    last finite state, so callers can inspect the trajectory.
    """

    def __init__(self, message, iteration=None, state=None):
        super().__init__(message)
        self.iteration = iteration
        self.state = state
