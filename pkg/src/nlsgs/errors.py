"""Exception types shared across the package."""


class DomainError(ValueError):
    """Invalid grid, field, or parameter values."""


class RegimeError(ValueError):
    """Operation requested outside its exponent/parameter regime."""


class GridMismatchError(ValueError):
    """Two fields on incompatible grids."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to converge."""
