"""Exception types shared across the package."""


class ContractError(ValueError):
    """A caller broke an operation's contract (dimension mismatch, bad argument)."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class DegenerateScaleError(ValueError):
    """The rescaling factor lambda is undefined because mu is (numerically) zero."""


class DegenerateInputError(ValueError):
    """An input is degenerate for the requested operation (e.g. a zero vector)."""


class UnboundedSetError(ValueError):
    """The operation requires a bounded feasible set."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class ResourceLimitError(RuntimeError):
    """The requested allocation exceeds the configured size limit."""
