"""
Shared plumbing for the Free Energy Agent toolkit

Provides:
- Logging configuration (level from FEA_LOG_LEVEL)
- Toolkit exception hierarchy
- Finite-value and symmetry checks used across modules
"""

import logging
import os
from typing import Optional

import numpy as np
from dotenv import load_dotenv


load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv('FEA_LOG_LEVEL', 'INFO').upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

SYMMETRY_TOL = 1e-9


class ToolkitError(Exception):
    """Base class for all toolkit errors"""
    pass


class DimensionError(ToolkitError, ValueError):
    """Raised when array shapes disagree with the model they belong to"""
    pass


class InsufficientSamplesError(ToolkitError, ValueError):
    """Raised when a Taylor embedding gets fewer than order+1 samples"""
    pass


class SingularMatrixError(ToolkitError):
    """Raised when a covariance or precision cannot be inverted"""
    pass


class DivergenceError(ToolkitError):
    """Raised when a simulation produces non-finite values"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class ImpossibleObservationError(ToolkitError):
    """Raised when an observation has zero likelihood under the current belief"""
    pass


class PlanningBudgetError(ToolkitError):
    """Raised when plan enumeration would exceed its budget"""
    pass


class PlanningError(ToolkitError):
    """Raised when a plan optimizer receives unusable scores"""
    pass


def check_finite(values, what: str, step: Optional[int] = None) -> None:
    """
    Raise DivergenceError if any entry is NaN or infinite

    Args:
        values: Array-like to check
        what: Description used in the error message
        step: Step index of the simulation, if any
    """
    if not np.all(np.isfinite(values)):
        where = f" at step {step}" if step is not None else ""
        raise DivergenceError(f"{what} became non-finite{where}", step=step)


def as_matrix(values, name: str) -> np.ndarray:
    """
    Convert nested sequences to a 2-D float array

    Args:
        values: Nested list or array
        name: Matrix name for error messages

    Returns:
        2-D float array (a copy)
    """
    matrix = np.array(values, dtype=float)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {matrix.shape}")
    return matrix


def is_symmetric(matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    """Relative symmetry check"""
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    return bool(np.allclose(matrix, matrix.T, rtol=0.0, atol=tol * scale))


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)
