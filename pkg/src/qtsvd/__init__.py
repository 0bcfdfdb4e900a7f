"""Dense-simulation toolkit for quantum tensor SVD on third-order tensors."""
from ._kernels import BACKEND
from .errors import (
    ConsistencyError,
    ContractError,
    DegenerateInputError,
    EmptyTruncationError,
    PostselectionError,
    QubitBudgetError,
    ShapeError,
    TsvdError,
)
from .tensor import Tensor3

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Tensor3",
    "TsvdError",
    "ShapeError",
    "ContractError",
    "DegenerateInputError",
    "PostselectionError",
    "EmptyTruncationError",
    "ConsistencyError",
    "QubitBudgetError",
]
