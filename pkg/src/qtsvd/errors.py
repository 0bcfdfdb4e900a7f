"""Exception types raised across the package."""


class TsvdError(Exception):
    """Base class for library errors."""


class ShapeError(TsvdError, ValueError):
    """Array or register dimensions do not fit the operation."""


class ContractError(TsvdError, ValueError):
    """An input violates an operation's precondition (e.g. non-unitary matrix)."""


class DegenerateInputError(TsvdError, ValueError):
    """Zero tensor, zero slice, or a spectrum too degenerate to resolve."""


class PostselectionError(TsvdError):
    """The requested measurement branch has zero probability."""


class EmptyTruncationError(PostselectionError):
    """Threshold removes every singular value, so nothing survives postselection."""


class ConsistencyError(TsvdError):
    """Auxiliary registers carry more residual weight than the error budget allows."""


class QubitBudgetError(TsvdError):
    """Requested register layout exceeds the dense-simulation qubit cap."""
