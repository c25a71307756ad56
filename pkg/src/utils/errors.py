class YamabeLabError(Exception):
    """Base class for every error raised by the lab. Carries the CLI exit code."""

    exit_code = 1


class ConfigError(YamabeLabError, ValueError):
    exit_code = 2


class ArgumentError(YamabeLabError, ValueError):
    exit_code = 2


class DomainError(ArgumentError):
    """Evaluation outside the manifold's domain, e.g. r = 0 without a smooth pole."""


class AssemblyError(YamabeLabError, ValueError):
    exit_code = 2

    def __init__(self, message: str, node: int = None, radius: float = None):
        super().__init__(message)
        self.node = node
        self.radius = radius


class PreconditionError(YamabeLabError):
    exit_code = 1


class NonConvergenceError(YamabeLabError, RuntimeError):
    """Iteration budget exhausted. `best` holds the best iterate seen so far."""

    exit_code = 3

    def __init__(self, message: str, best=None, diagnostics: dict = None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}
