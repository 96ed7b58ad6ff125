"""Dictionary learning with an elementwise L1 and a row-wise L-infinity
penalty on the coefficient matrix."""

from .core import (
    CoeffMatrix,
    DataMatrix,
    Dictionary,
    DimensionMismatch,
    HyperParams,
    NonFiniteObjective,
    TrainTrace,
    check_dims,
)
from .solver import FitResult, SolverConfig, encode, fit, objective, update_D, update_R

__version__ = "0.1.0"

__all__ = [
    "CoeffMatrix",
    "DataMatrix",
    "Dictionary",
    "DimensionMismatch",
    "FitResult",
    "HyperParams",
    "NonFiniteObjective",
    "SolverConfig",
    "TrainTrace",
    "check_dims",
    "encode",
    "fit",
    "objective",
    "update_D",
    "update_R",
]
