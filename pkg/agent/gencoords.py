"""
Generalized coordinates

Provides:
- GeneralizedVector: a signal stacked with its first p temporal derivatives
- The shift operator D (vector and matrix forms)
- Taylor embedding of sampled signals into generalized coordinates
- Smoothness precision S(sigma^2) for Gaussian-filtered noise
- Generalized precision assembly (Kronecker products)

Layout convention: entry i of derivative order k lives at index k*n + i.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from .base import (
    DimensionError,
    InsufficientSamplesError,
    SingularMatrixError,
    is_symmetric,
    symmetrize,
)


MAX_ORDER = 6
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class GeneralizedVector:
    """
    A base vector and its temporal derivatives, stored as [x, x', x'', ...]

    The role tag only labels what the vector holds (state, observation,
    cause, noise, gradient); arithmetic requires matching shapes, not roles.
    """
    order: int
    base_dim: int
    data: np.ndarray
    role: str = 'state'

    def __post_init__(self):
        if self.order < 0:
            raise DimensionError(f"order must be >= 0, got {self.order}")
        if self.base_dim < 1:
            raise DimensionError(f"base_dim must be >= 1, got {self.base_dim}")

        data = np.array(self.data, dtype=float).reshape(-1)
        expected = self.base_dim * (self.order + 1)
        if data.size != expected:
            raise DimensionError(
                f"{self.role} vector of order {self.order} and base_dim "
                f"{self.base_dim} needs {expected} entries, got {data.size}"
            )
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @classmethod
    def zeros(cls, order: int, base_dim: int, role: str = 'state') -> 'GeneralizedVector':
        return cls(order, base_dim, np.zeros(base_dim * (order + 1)), role)

    @classmethod
    def from_blocks(cls, blocks, role: str = 'state') -> 'GeneralizedVector':
        """Build from a (p+1) x n array of derivative blocks"""
        blocks = np.atleast_2d(np.asarray(blocks, dtype=float))
        return cls(blocks.shape[0] - 1, blocks.shape[1], blocks.reshape(-1), role)

    @property
    def blocks(self) -> np.ndarray:
        """Read-only (p+1) x n view of the derivative blocks"""
        return self.data.reshape(self.order + 1, self.base_dim)

    def block(self, k: int) -> np.ndarray:
        return self.blocks[k]

    def with_data(self, data) -> 'GeneralizedVector':
        return GeneralizedVector(self.order, self.base_dim, data, self.role)

    def _check_compatible(self, other: 'GeneralizedVector'):
        if (self.order, self.base_dim) != (other.order, other.base_dim):
            raise DimensionError(
                f"Cannot combine vectors of shape (order={self.order}, n={self.base_dim}) "
                f"and (order={other.order}, n={other.base_dim})"
            )

    def __add__(self, other: 'GeneralizedVector') -> 'GeneralizedVector':
        self._check_compatible(other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: 'GeneralizedVector') -> 'GeneralizedVector':
        self._check_compatible(other)
        return self.with_data(self.data - other.data)

    def __mul__(self, scalar: float) -> 'GeneralizedVector':
        return self.with_data(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> 'GeneralizedVector':
        return self.with_data(-self.data)

    def __len__(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return (f"GeneralizedVector(order={self.order}, base_dim={self.base_dim}, "
                f"role={self.role!r}, data={self.data.tolist()})")


@dataclass(frozen=True)
class SmoothnessKernel:
    """Width sigma of the Gaussian filter behind colored noise, and embedding order p"""
    sigma: float
    order: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"order must be in [0, {MAX_ORDER}], got {self.order}")


@dataclass(frozen=True, eq=False)
class GeneralizedPrecision:
    """Symmetric positive semidefinite precision over generalized coordinates"""
    matrix: np.ndarray
    _logdet: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"precision must be square, got shape {matrix.shape}")
        if not is_symmetric(matrix):
            raise ValueError("precision matrix is not symmetric")
        matrix = symmetrize(matrix)
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if matrix.size and linalg.eigvalsh(matrix)[0] < -1e-9 * scale:
            raise ValueError("precision matrix is not positive semidefinite")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def logdet(self) -> float:
        """
        Log-determinant of the precision

        Raises:
            SingularMatrixError: If the precision is singular
        """
        if not self._logdet:
            sign, value = np.linalg.slogdet(self.matrix)
            if sign <= 0:
                raise SingularMatrixError("precision is singular; covariance undefined")
            self._logdet.append(float(value))
        return self._logdet[0]

    def covariance(self) -> np.ndarray:
        """Inverse of the precision (pseudo-inverse when singular)"""
        return linalg.pinvh(self.matrix)

    def max_eigenvalue(self) -> float:
        return float(linalg.eigvalsh(self.matrix)[-1])


def shift(v: GeneralizedVector) -> GeneralizedVector:
    """
    Apply the temporal shift operator D

    Block k of the result is block k+1 of the input; the last block is zero.
    """
    blocks = np.zeros_like(v.blocks)
    blocks[:-1] = v.blocks[1:]
    return GeneralizedVector(v.order, v.base_dim, blocks.reshape(-1), v.role)


@lru_cache(maxsize=64)
def shift_matrix(order: int, base_dim: int) -> np.ndarray:
    """Matrix form of D, so that shift_matrix(p, n) @ v.data == shift(v).data"""
    matrix = np.kron(np.eye(order + 1, k=1), np.eye(base_dim))
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=64)
def taylor_weights(order: int, dt: float) -> np.ndarray:
    """
    Backward-difference weights for a Taylor embedding

    Row k holds the weights that turn the last order+1 samples (newest
    first) into the k-th derivative at the newest sample. The fit is the
    unique polynomial of degree order through the window, so polynomials
    of degree <= order are reproduced exactly.

    Args:
        order: Embedding order p
        dt: Sampling interval

    Returns:
        (p+1) x (p+1) read-only weight matrix
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")

    powers = np.arange(order + 1)
    # sample j sits at time -j*dt; columns scaled out to keep the solve well-conditioned
    nodes = -np.arange(order + 1, dtype=float)
    vandermonde = np.power(nodes[:, None], powers[None, :])
    scale = np.array([math.factorial(k) / dt ** k for k in powers])
    weights = scale[:, None] * linalg.inv(vandermonde)
    weights.setflags(write=False)
    return weights


def embed_taylor(samples: Union[Sequence, np.ndarray], dt: float, p: int) -> GeneralizedVector:
    """
    Turn discrete samples into a generalized observation

    Args:
        samples: Time-ordered samples (oldest first), scalars or vectors
        dt: Sampling interval
        p: Embedding order

    Returns:
        GeneralizedVector of derivatives at the most recent sample

    Raises:
        InsufficientSamplesError: If fewer than p+1 samples are given
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < p + 1:
        raise InsufficientSamplesError(
            f"order {p} embedding needs {p + 1} samples, got {samples.shape[0]}"
        )

    window = samples[-(p + 1):][::-1]
    blocks = taylor_weights(p, float(dt)) @ window
    return GeneralizedVector(p, samples.shape[1], blocks.reshape(-1), role='observation')


def embed_series(samples: Union[Sequence, np.ndarray], dt: float, p: int) -> list:
    """
    Embed every sample of a series, repeating the first sample to fill the
    window at the start

    Returns:
        One GeneralizedVector per sample
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    padded = np.vstack([np.repeat(samples[:1], p, axis=0), samples])
    return [embed_taylor(padded[t:t + p + 1], dt, p) for t in range(samples.shape[0])]


@lru_cache(maxsize=16)
def _unit_covariance(order: int) -> np.ndarray:
    """Derivative covariance of a unit-width Gaussian-autocorrelation process"""
    matrix = np.zeros((order + 1, order + 1))
    for i in range(order + 1):
        for j in range(order + 1):
            if (i + j) % 2:
                continue
            half = (i + j) // 2
            magnitude = math.factorial(i + j) / (math.factorial(half) * 4.0 ** half)
            matrix[i, j] = (-1) ** j * (-1) ** half * magnitude
    return matrix


def derivative_covariance(kernel: SmoothnessKernel) -> np.ndarray:
    """
    Covariance M of the first p derivatives of Gaussian-filtered noise

    The autocorrelation is rho(h) = exp(-h^2 / (4 sigma^2)); entries are
    (+/-) derivatives of rho at zero lag and vanish when i+j is odd.
    """
    scale = kernel.sigma ** np.arange(kernel.order + 1)
    return _unit_covariance(kernel.order) / np.outer(scale, scale)


def smoothness_precision(kernel: SmoothnessKernel) -> np.ndarray:
    """
    Smoothness precision S(sigma^2) = M^-1

    Args:
        kernel: Noise smoothness and embedding order

    Returns:
        Symmetric positive definite (p+1) x (p+1) matrix

    Raises:
        SingularMatrixError: If M cannot be inverted reliably
    """
    unit = _unit_covariance(kernel.order)
    if np.linalg.cond(unit) > MAX_CONDITION:
        raise SingularMatrixError(f"derivative covariance of order {kernel.order} is singular")
    try:
        factor = linalg.cho_factor(unit, lower=True)
    except linalg.LinAlgError as e:
        raise SingularMatrixError(f"derivative covariance is not positive definite: {e}") from e

    unit_inverse = linalg.cho_solve(factor, np.eye(kernel.order + 1))
    scale = kernel.sigma ** np.arange(kernel.order + 1)
    return symmetrize(np.outer(scale, scale) * unit_inverse)


def generalized_precision(S, Pi, order: int = None, base_dim: int = None) -> GeneralizedPrecision:
    """
    Assemble the generalized precision S kron Pi

    Args:
        S: (p+1) x (p+1) smoothness precision
        Pi: n x n base precision
        order: Expected order p, checked when given
        base_dim: Expected n, checked when given

    Returns:
        GeneralizedPrecision of size n(p+1)
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Pi = np.atleast_2d(np.asarray(Pi, dtype=float))

    for name, matrix in (('S', S), ('Pi', Pi)):
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"{name} must be square, got shape {matrix.shape}")
        if not is_symmetric(matrix):
            raise DimensionError(f"{name} must be symmetric")
    if order is not None and S.shape[0] != order + 1:
        raise DimensionError(f"S has size {S.shape[0]} but order {order} needs {order + 1}")
    if base_dim is not None and Pi.shape[0] != base_dim:
        raise DimensionError(f"Pi has size {Pi.shape[0]} but base_dim is {base_dim}")

    return GeneralizedPrecision(np.kron(S, Pi))
