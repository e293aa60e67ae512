"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation.

    Raised for quantile arguments outside (0, 1), barycentric weights whose
    combined inverse scale is nonpositive, and similar domain violations.
    """


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to meet its contract.

    Raised when a root find, fixed point, LP solve, or eigensolve does not
    converge or a post-condition residual check fails.
    """


class VertexBudgetError(NumericalError):
    """Vertex enumeration would exceed the configured combinatorial budget."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class SchemaError(ValueError):
    """A serialized artifact has an unknown or incompatible schema version."""
