"""Exception types shared across the package."""


class RelgenError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(RelgenError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidConfigError(RelgenError, ValueError):
    """A configuration file or object fails validation."""


class DegenerateGraphError(RelgenError, RuntimeError):
    """Graph sampling produced a structure unusable for generation."""


class DegenerateDataError(RelgenError, RuntimeError):
    """Sampled data is too degenerate for the requested fit (e.g. constant
    pre-run values for a categorical node)."""


class ContractViolationError(RelgenError, RuntimeError):
    """Internal call contract broken (shape mismatch, missing codebook, ...)."""


class NonFiniteValueError(RelgenError, RuntimeError):
    """Propagation produced NaN or infinity; message names the node."""


class UndefinedMetricError(RelgenError, RuntimeError):
    """A requested metric is undefined for the given data (e.g. single-class
    truth for AUC)."""
