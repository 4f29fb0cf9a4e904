"""Exception types shared across the package."""


class WavecheckError(Exception):
    pass


class ContractViolation(WavecheckError, ValueError):
    """Raised when inputs break an operation's preconditions (shape, basis, finiteness)."""


class ConfigError(WavecheckError, ValueError):
    """Invalid run or study configuration."""


class SolverError(WavecheckError, RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class ReliabilityViolation(WavecheckError):
    """The estimator came out smaller than the error it is supposed to bound."""
