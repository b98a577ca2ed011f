"""
Generative models

Provides:
- NoiseSpec: covariance plus smoothness of a noise source
- GenerativeModel base class (dynamics f, observation g, Jacobians)
- LinearModel, AttractorModel and FunctionModel
- Goal encodings: attractor dynamics and Boltzmann preferences

Dynamics and observations are generalized by local linearization around
the order-0 block: block 0 is f(x0, v0), block k>0 is J_x x_k + J_v v_k.
For linear models this is exact.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from .base import DimensionError, as_matrix, is_symmetric, symmetrize
from .gencoords import (
    GeneralizedPrecision,
    GeneralizedVector,
    SmoothnessKernel,
    generalized_precision,
    smoothness_precision,
)


CauseLike = Union[None, np.ndarray, GeneralizedVector]


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Covariance and temporal smoothness of a process or observation noise"""
    covariance: np.ndarray
    smoothness: SmoothnessKernel = SmoothnessKernel(sigma=1.0)
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        covariance = as_matrix(self.covariance, 'covariance')
        if covariance.shape[0] != covariance.shape[1]:
            raise DimensionError(f"covariance must be square, got shape {covariance.shape}")
        if not is_symmetric(covariance):
            raise ValueError("covariance must be symmetric")
        covariance = symmetrize(covariance)
        try:
            factor = linalg.cho_factor(covariance, lower=True)
        except linalg.LinAlgError as e:
            raise ValueError(f"covariance must be positive definite: {e}") from e

        precision = symmetrize(linalg.cho_solve(factor, np.eye(covariance.shape[0])))
        covariance.setflags(write=False)
        precision.setflags(write=False)
        object.__setattr__(self, 'covariance', covariance)
        self._cache['precision'] = precision

    @classmethod
    def isotropic(cls, variance: float, dim: int, sigma: float = 1.0) -> 'NoiseSpec':
        return cls(variance * np.eye(dim), SmoothnessKernel(sigma=sigma))

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @property
    def precision(self) -> np.ndarray:
        return self._cache['precision']

    def generalized_precision(self, order: Optional[int] = None) -> GeneralizedPrecision:
        """S(sigma^2) kron Sigma^-1 at the given order (the kernel's own order by default)"""
        order = self.smoothness.order if order is None else order
        key = ('generalized', order)
        if key not in self._cache:
            kernel = SmoothnessKernel(self.smoothness.sigma, order)
            self._cache[key] = generalized_precision(
                smoothness_precision(kernel), self.precision, order=order, base_dim=self.dim
            )
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class AttractorGoal:
    """Target state and time constant of an attractor f(x) = (target - x) / tau"""
    target: np.ndarray
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        target = np.atleast_1d(np.array(self.target, dtype=float))
        target.setflags(write=False)
        object.__setattr__(self, 'target', target)


@dataclass(frozen=True)
class PreferenceModel:
    """
    Prior preference over observations, as an unnormalized log-density

    When built from a reward, log_density(y) = beta * reward(y).
    """
    log_density: Callable
    reward: Optional[Callable] = None
    beta: Optional[float] = None

    def __call__(self, y):
        return self.log_density(y)

    def over(self, observations) -> np.ndarray:
        """Evaluate the log-density over a finite set of observations"""
        return np.array([float(self.log_density(y)) for y in observations])


def boltzmann_preference(reward_fn: Callable, beta: float) -> PreferenceModel:
    """
    Boltzmann prior p(y) proportional to exp(beta * reward(y))

    Args:
        reward_fn: Observation -> reward (may be vectorized)
        beta: Inverse temperature, > 0

    Returns:
        PreferenceModel whose log-density is beta * reward(y)
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    beta = float(beta)
    return PreferenceModel(
        log_density=lambda y: beta * reward_fn(y),
        reward=reward_fn,
        beta=beta,
    )


def _numeric_jacobian(fn: Callable, x: np.ndarray, out_dim: int) -> np.ndarray:
    """Central differences with a step scaled to each component's magnitude"""
    x = np.asarray(x, dtype=float)
    jacobian = np.zeros((out_dim, x.size))
    for i in range(x.size):
        h = 1e-6 * max(1.0, abs(x[i]))
        step = np.zeros_like(x)
        step[i] = h
        jacobian[:, i] = (np.asarray(fn(x + step)) - np.asarray(fn(x - step))) / (2 * h)
    return jacobian


class GenerativeModel:
    """
    Base class for generative models

    Subclasses implement the base-level flow f(x, v) and observation g(x).
    Jacobians default to central finite differences; override them when an
    analytic form exists.
    """

    def __init__(
        self,
        state_dim: int,
        cause_dim: int,
        obs_dim: int,
        process_noise: NoiseSpec,
        obs_noise: NoiseSpec,
        name: str = "GenerativeModel"
    ):
        """
        Initialize generative model

        Args:
            state_dim: Hidden state dimension n
            cause_dim: Cause (input) dimension m, may be 0
            obs_dim: Observation dimension q
            process_noise: Noise on the dynamics (n x n)
            obs_noise: Noise on the observations (q x q)
            name: Name for logging
        """
        if process_noise.dim != state_dim:
            raise DimensionError(
                f"process noise is {process_noise.dim}-dimensional but state_dim is {state_dim}"
            )
        if obs_noise.dim != obs_dim:
            raise DimensionError(
                f"observation noise is {obs_noise.dim}-dimensional but obs_dim is {obs_dim}"
            )
        self.state_dim = state_dim
        self.cause_dim = cause_dim
        self.obs_dim = obs_dim
        self.process_noise = process_noise
        self.obs_noise = obs_noise
        self.name = name
        self.logger = logging.getLogger(name)

    def flow(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Base-level dynamics f(x, v)"""
        raise NotImplementedError

    def observe(self, x: np.ndarray) -> np.ndarray:
        """Base-level observation g(x)"""
        raise NotImplementedError

    def jacobian_f(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return _numeric_jacobian(lambda s: self.flow(s, v), x, self.state_dim)

    def jacobian_v(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.cause_dim == 0:
            return np.zeros((self.state_dim, 0))
        return _numeric_jacobian(lambda c: self.flow(x, c), v, self.state_dim)

    def jacobian_g(self, x: np.ndarray) -> np.ndarray:
        return _numeric_jacobian(self.observe, x, self.obs_dim)

    def generalize_causes(self, v: CauseLike, order: int) -> GeneralizedVector:
        """Plain cause vectors enter at order 0 only"""
        dim = max(self.cause_dim, 1)
        if isinstance(v, GeneralizedVector):
            if v.order != order or v.base_dim != dim:
                raise DimensionError(
                    f"generalized causes have shape (order={v.order}, n={v.base_dim}), "
                    f"expected (order={order}, n={dim})"
                )
            return v
        blocks = np.zeros((order + 1, dim))
        if v is not None and self.cause_dim > 0:
            v = np.atleast_1d(np.asarray(v, dtype=float))
            if v.size != self.cause_dim:
                raise DimensionError(f"cause vector has {v.size} entries, expected {self.cause_dim}")
            blocks[0] = v
        return GeneralizedVector.from_blocks(blocks, role='cause')

    def _check_state(self, x: GeneralizedVector):
        if x.base_dim != self.state_dim:
            raise DimensionError(
                f"{self.name}: state has base_dim {x.base_dim}, expected {self.state_dim}"
            )

    def _base_causes(self, causes: GeneralizedVector) -> np.ndarray:
        return causes.blocks[0, :self.cause_dim]

    def dynamics(self, x: GeneralizedVector, v: CauseLike = None) -> GeneralizedVector:
        """Generalized flow f~(x~, v~)"""
        self._check_state(x)
        causes = self.generalize_causes(v, x.order)
        x0 = x.blocks[0]
        v0 = self._base_causes(causes)

        blocks = np.empty_like(x.blocks)
        blocks[0] = self.flow(x0, v0)
        if x.order > 0:
            blocks[1:] = x.blocks[1:] @ self.jacobian_f(x0, v0).T
            if self.cause_dim > 0:
                blocks[1:] += causes.blocks[1:, :self.cause_dim] @ self.jacobian_v(x0, v0).T
        return GeneralizedVector(x.order, x.base_dim, blocks.reshape(-1), role='prediction')

    def observation(self, x: GeneralizedVector) -> GeneralizedVector:
        """Generalized observation g~(x~)"""
        self._check_state(x)
        x0 = x.blocks[0]
        blocks = np.empty((x.order + 1, self.obs_dim))
        blocks[0] = self.observe(x0)
        if x.order > 0:
            blocks[1:] = x.blocks[1:] @ self.jacobian_g(x0).T
        return GeneralizedVector(x.order, self.obs_dim, blocks.reshape(-1), role='observation')

    def generalized_jacobians(
        self, x: GeneralizedVector, v: CauseLike = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Jacobians of the generalized flow and observation w.r.t. x~

        Higher blocks are J(x0) x_k, so block k depends on x0 through the
        curvature of f and g. That column is differenced numerically; the
        rest is I kron J(x0).
        """
        self._check_state(x)
        jac_f, jac_g = jacobians(self, x, v)
        eye = np.eye(x.order + 1)
        full_f, full_g = np.kron(eye, jac_f), np.kron(eye, jac_g)
        if x.order == 0:
            return full_f, full_g

        n = self.state_dim
        causes = self.generalize_causes(v, x.order)

        def generalized(x0):
            data = x.data.copy()
            data[:n] = x0
            shifted = x.with_data(data)
            return np.concatenate([self.dynamics(shifted, causes).data, self.observation(shifted).data])

        column = _numeric_jacobian(generalized, x.blocks[0], (x.order + 1) * (n + self.obs_dim))
        full_f[n:, :n] = column[n:len(x)]
        full_g[self.obs_dim:, :n] = column[len(x) + self.obs_dim:]
        return full_f, full_g


class LinearModel(GenerativeModel):
    """Linear state-space model: f = A x + B v, g = C x"""

    def __init__(
        self,
        A,
        B,
        C,
        process_noise: NoiseSpec,
        obs_noise: NoiseSpec,
        name: str = "LinearModel"
    ):
        A = as_matrix(A, 'A')
        C = as_matrix(C, 'C')
        n = A.shape[0]
        B = np.zeros((n, 0)) if B is None else as_matrix(B, 'B')

        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows but A is {n}x{n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns but A is {n}x{n}")

        super().__init__(n, B.shape[1], C.shape[0], process_noise, obs_noise, name)
        for matrix in (A, B, C):
            matrix.setflags(write=False)
        self.A, self.B, self.C = A, B, C
        self._generalized = {}

    def flow(self, x, v):
        drive = self.A @ x
        if self.cause_dim > 0:
            drive = drive + self.B @ v
        return drive

    def observe(self, x):
        return self.C @ x

    def jacobian_f(self, x, v):
        return self.A

    def jacobian_v(self, x, v):
        return self.B

    def jacobian_g(self, x):
        return self.C

    def dynamics(self, x: GeneralizedVector, v: CauseLike = None) -> GeneralizedVector:
        return linear_dynamics(self, x, v)

    def generalized_jacobians(self, x, v=None):
        self._check_state(x)
        if x.order not in self._generalized:
            eye = np.eye(x.order + 1)
            self._generalized[x.order] = (np.kron(eye, self.A), np.kron(eye, self.C))
        return self._generalized[x.order]


class AttractorModel(GenerativeModel):
    """
    Goal-directed model whose flow pulls beliefs toward a target

    The observation map is a fixed matrix C (identity by default).
    """

    def __init__(
        self,
        goal: AttractorGoal,
        process_noise: NoiseSpec,
        obs_noise: NoiseSpec,
        C=None,
        name: str = "AttractorModel"
    ):
        n = goal.target.size
        C = np.eye(n) if C is None else as_matrix(C, 'C')
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns but the target has {n} entries")

        super().__init__(n, 0, C.shape[0], process_noise, obs_noise, name)
        C.setflags(write=False)
        self.goal = goal
        self.C = C
        self._generalized = {}

    def flow(self, x, v):
        return (self.goal.target - x) / self.goal.tau

    def observe(self, x):
        return self.C @ x

    def jacobian_f(self, x, v):
        return -np.eye(self.state_dim) / self.goal.tau

    def jacobian_g(self, x):
        return self.C

    def dynamics(self, x: GeneralizedVector, v: CauseLike = None) -> GeneralizedVector:
        self._check_state(x)
        return attractor_dynamics(self.goal, x)

    def generalized_jacobians(self, x, v=None):
        self._check_state(x)
        if x.order not in self._generalized:
            eye = np.eye(x.order + 1)
            self._generalized[x.order] = (
                np.kron(eye, self.jacobian_f(None, None)), np.kron(eye, self.C)
            )
        return self._generalized[x.order]


class FunctionModel(GenerativeModel):
    """Generative model from plain callables, with optional analytic Jacobians"""

    def __init__(
        self,
        f: Callable,
        g: Callable,
        state_dim: int,
        obs_dim: int,
        process_noise: NoiseSpec,
        obs_noise: NoiseSpec,
        cause_dim: int = 0,
        jac_f: Optional[Callable] = None,
        jac_g: Optional[Callable] = None,
        name: str = "FunctionModel"
    ):
        super().__init__(state_dim, cause_dim, obs_dim, process_noise, obs_noise, name)
        self._f = f
        self._g = g
        self._jac_f = jac_f
        self._jac_g = jac_g

    def flow(self, x, v):
        return np.atleast_1d(np.asarray(self._f(x, v), dtype=float))

    def observe(self, x):
        return np.atleast_1d(np.asarray(self._g(x), dtype=float))

    def jacobian_f(self, x, v):
        if self._jac_f is None:
            return super().jacobian_f(x, v)
        return np.atleast_2d(np.asarray(self._jac_f(x, v), dtype=float))

    def jacobian_g(self, x):
        if self._jac_g is None:
            return super().jacobian_g(x)
        return np.atleast_2d(np.asarray(self._jac_g(x), dtype=float))


def linear_dynamics(m: LinearModel, x: GeneralizedVector, v: CauseLike = None) -> GeneralizedVector:
    """
    Generalized linear flow: block k = A x_k + B v_k

    Args:
        m: Linear model
        x: Generalized state
        v: Causes (plain vectors enter at order 0 only)

    Returns:
        Predicted generalized motion
    """
    m._check_state(x)
    causes = m.generalize_causes(v, x.order)
    blocks = x.blocks @ m.A.T
    if m.cause_dim > 0:
        blocks = blocks + causes.blocks[:, :m.cause_dim] @ m.B.T
    return GeneralizedVector(x.order, x.base_dim, blocks.reshape(-1), role='prediction')


def attractor_dynamics(goal: AttractorGoal, x: GeneralizedVector) -> GeneralizedVector:
    """Block 0 = (target - x0) / tau; higher blocks = -x_k / tau"""
    if goal.target.size != x.base_dim:
        raise DimensionError(
            f"target has {goal.target.size} entries but the state has base_dim {x.base_dim}"
        )
    blocks = -x.blocks / goal.tau
    blocks[0] += goal.target / goal.tau
    return GeneralizedVector(x.order, x.base_dim, blocks.reshape(-1), role='prediction')


def jacobians(model: GenerativeModel, x, v: CauseLike = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Base-level Jacobians (df/dx, dg/dx)

    Args:
        model: Generative model
        x: Base state vector or GeneralizedVector (its order-0 block is used)
        v: Causes

    Returns:
        Tuple of (n x n, q x n) matrices
    """
    if isinstance(x, GeneralizedVector):
        causes = model.generalize_causes(v, x.order)
        x0 = x.blocks[0]
    else:
        causes = model.generalize_causes(v, 0)
        x0 = np.atleast_1d(np.asarray(x, dtype=float))
    v0 = causes.blocks[0, :model.cause_dim]
    return np.asarray(model.jacobian_f(x0, v0)), np.asarray(model.jacobian_g(x0))
