"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: configs, preconditions, malformed fields."""


class NumericalError(RuntimeError):
    """Numerical machinery failed: eigensolve, overflow, trajectory blow-up."""
