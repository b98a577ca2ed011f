"""
State estimation by gradient descent on variational free energy

Provides:
- Prediction errors, free energy F, its gradient and curvature
- The Euler-integrated belief update (perception)
- run_filter: perception over a sampled observation series

Under the Laplace approximation F is a precision-weighted sum of squared
prediction errors plus log-determinant terms; the mean-field residual is a
constant at the mode and is left out of reported values.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .base import DimensionError, check_finite, symmetrize
from .gencoords import (
    GeneralizedPrecision,
    GeneralizedVector,
    embed_series,
    shift,
    shift_matrix,
)
from .model import CauseLike, GenerativeModel


logger = logging.getLogger(__name__)

STABILITY_LIMIT = 2.0


@dataclass(frozen=True, eq=False)
class Beliefs:
    """Posterior mode over generalized states and its precision"""
    mean: GeneralizedVector
    precision: GeneralizedPrecision

    def __post_init__(self):
        if self.precision.size != len(self.mean):
            raise DimensionError(
                f"precision has size {self.precision.size} but the mean has {len(self.mean)} entries"
            )

    @property
    def covariance(self) -> np.ndarray:
        return self.precision.covariance()


@dataclass(frozen=True)
class EstimatorConfig:
    """Learning rate, Euler step and inner iterations of the belief update"""
    kappa_x: float = 1.0
    dt: float = 0.005
    steps_per_observation: int = 1

    def __post_init__(self):
        if not self.kappa_x > 0:
            raise ValueError(f"kappa_x must be > 0, got {self.kappa_x}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if int(self.steps_per_observation) != self.steps_per_observation or self.steps_per_observation < 1:
            raise ValueError(
                f"steps_per_observation must be an integer >= 1, got {self.steps_per_observation}"
            )


@dataclass(frozen=True, eq=False)
class PredictionErrors:
    """Sensory error eps_y = y - g(mu) and state error eps_x = D mu - f(mu, v)"""
    eps_y: GeneralizedVector
    eps_x: GeneralizedVector


MeanLike = Union[Beliefs, GeneralizedVector]


def _mean_of(beliefs: MeanLike) -> GeneralizedVector:
    return beliefs.mean if isinstance(beliefs, Beliefs) else beliefs


def _check_observation(model: GenerativeModel, mean: GeneralizedVector, y: GeneralizedVector):
    if mean.base_dim != model.state_dim:
        raise DimensionError(f"belief mean has base_dim {mean.base_dim}, model state_dim is {model.state_dim}")
    if y.base_dim != model.obs_dim:
        raise DimensionError(f"observation has base_dim {y.base_dim}, model obs_dim is {model.obs_dim}")
    if y.order != mean.order:
        raise DimensionError(f"observation has order {y.order} but beliefs have order {mean.order}")


def prediction_errors(model: GenerativeModel, beliefs: MeanLike, y: GeneralizedVector,
                      v: CauseLike = None) -> PredictionErrors:
    """
    Sensory and state prediction errors in generalized coordinates

    Args:
        model: Generative model
        beliefs: Beliefs or a bare generalized mean
        y: Generalized observation
        v: Causes

    Returns:
        PredictionErrors
    """
    mean = _mean_of(beliefs)
    _check_observation(model, mean, y)

    eps_y = y.data - model.observation(mean).data
    eps_x = shift(mean).data - model.dynamics(mean, v).data
    return PredictionErrors(
        eps_y=GeneralizedVector(y.order, y.base_dim, eps_y, role='sensory_error'),
        eps_x=GeneralizedVector(mean.order, mean.base_dim, eps_x, role='state_error'),
    )


def _precisions(model: GenerativeModel, order: int):
    return (model.obs_noise.generalized_precision(order),
            model.process_noise.generalized_precision(order))


def vfe(model: GenerativeModel, beliefs: MeanLike, y: GeneralizedVector, v: CauseLike = None) -> float:
    """
    Laplace-form variational free energy

    F = 1/2 eps_y' Pz eps_y + 1/2 eps_x' Pw eps_x + 1/2 ln|Sw| + 1/2 ln|Sz|

    Raises:
        SingularMatrixError: If a generalized precision is singular
    """
    mean = _mean_of(beliefs)
    errors = prediction_errors(model, mean, y, v)
    obs_precision, process_precision = _precisions(model, mean.order)

    ey, ex = errors.eps_y.data, errors.eps_x.data
    quadratic = 0.5 * ey @ obs_precision.matrix @ ey + 0.5 * ex @ process_precision.matrix @ ex
    # ln|Sigma| = -ln|Pi|
    return float(quadratic - 0.5 * process_precision.logdet() - 0.5 * obs_precision.logdet())


def vfe_gradient(model: GenerativeModel, beliefs: MeanLike, y: GeneralizedVector,
                 v: CauseLike = None) -> GeneralizedVector:
    """
    Gradient of F with respect to the generalized mean

    grad = -(dg/dmu)' Pz eps_y + (D - df/dmu)' Pw eps_x
    """
    mean = _mean_of(beliefs)
    errors = prediction_errors(model, mean, y, v)
    obs_precision, process_precision = _precisions(model, mean.order)
    jac_f, jac_g = model.generalized_jacobians(mean, v)
    D = shift_matrix(mean.order, mean.base_dim)

    gradient = (-jac_g.T @ (obs_precision.matrix @ errors.eps_y.data)
                + (D - jac_f).T @ (process_precision.matrix @ errors.eps_x.data))
    return GeneralizedVector(mean.order, mean.base_dim, gradient, role='gradient')


def belief_precision(model: GenerativeModel, beliefs: MeanLike, v: CauseLike = None) -> GeneralizedPrecision:
    """
    Curvature of F at the mode

    Pi_x = (D - df/dmu)' Pw (D - df/dmu) + (dg/dmu)' Pz (dg/dmu)
    """
    mean = _mean_of(beliefs)
    obs_precision, process_precision = _precisions(model, mean.order)
    jac_f, jac_g = model.generalized_jacobians(mean, v)
    residual = shift_matrix(mean.order, mean.base_dim) - jac_f

    matrix = (residual.T @ process_precision.matrix @ residual
              + jac_g.T @ obs_precision.matrix @ jac_g)
    return GeneralizedPrecision(symmetrize(matrix))


def initial_beliefs(model: GenerativeModel, mean: GeneralizedVector, v: CauseLike = None) -> Beliefs:
    return Beliefs(mean=mean, precision=belief_precision(model, mean, v))


def euler_stability_margin(model: GenerativeModel, beliefs: MeanLike, v: CauseLike,
                           cfg: EstimatorConfig) -> float:
    """kappa_x * dt * lambda_max(Pi_x); explicit Euler is unstable at or above 2"""
    return cfg.kappa_x * cfg.dt * belief_precision(model, beliefs, v).max_eigenvalue()


def step_estimate(model: GenerativeModel, beliefs: MeanLike, y: GeneralizedVector,
                  v: CauseLike = None, cfg: EstimatorConfig = EstimatorConfig(),
                  step_index: Optional[int] = None) -> Beliefs:
    """
    Advance beliefs with explicit Euler steps of mu <- mu + dt (D mu - kappa_x grad F)

    Args:
        model: Generative model
        beliefs: Current beliefs (or bare mean)
        y: Generalized observation
        v: Causes
        cfg: Estimator settings
        step_index: Index reported in divergence errors

    Returns:
        Updated Beliefs with refreshed precision

    Raises:
        DivergenceError: If the mean becomes non-finite
    """
    mean = _mean_of(beliefs)
    D = shift_matrix(mean.order, mean.base_dim)

    for _ in range(cfg.steps_per_observation):
        gradient = vfe_gradient(model, mean, y, v)
        data = mean.data + cfg.dt * (D @ mean.data - cfg.kappa_x * gradient.data)
        check_finite(data, "belief mean", step_index)
        mean = mean.with_data(data)

    return Beliefs(mean=mean, precision=belief_precision(model, mean, v))


def _cause_at(causes, t: int):
    if causes is None:
        return None
    return causes[t]


def run_filter(model: GenerativeModel, observations: Union[Sequence, np.ndarray], causes=None,
               cfg: EstimatorConfig = EstimatorConfig(), order: int = 0,
               sample_dt: Optional[float] = None,
               initial_mean: Optional[GeneralizedVector] = None) -> List[Beliefs]:
    """
    Perception over a sampled observation series

    Each sample is embedded together with the previous `order` samples (the
    first sample is repeated to fill the window at the start) and passed to
    step_estimate.

    Args:
        model: Generative model
        observations: T samples, shape (T,) or (T, q)
        causes: Optional per-sample causes (T, m) or list of GeneralizedVector
        cfg: Estimator settings
        order: Embedding order p
        sample_dt: Sampling interval (defaults to steps_per_observation * cfg.dt)
        initial_mean: Starting belief mean (zeros by default)

    Returns:
        One Beliefs per observation
    """
    observations = np.asarray(observations, dtype=float)
    if observations.ndim == 1:
        observations = observations[:, None]
    if observations.shape[0] == 0:
        raise ValueError("observation series must be non-empty")
    if observations.shape[1] != model.obs_dim:
        raise DimensionError(
            f"observations have {observations.shape[1]} channels, model obs_dim is {model.obs_dim}"
        )
    if causes is not None and len(causes) != observations.shape[0]:
        raise DimensionError(f"{len(causes)} cause samples for {observations.shape[0]} observations")

    sample_dt = cfg.dt * cfg.steps_per_observation if sample_dt is None else sample_dt
    if initial_mean is None:
        initial_mean = GeneralizedVector.zeros(order, model.state_dim)
    elif initial_mean.order != order:
        raise DimensionError(f"initial mean has order {initial_mean.order}, expected {order}")

    beliefs = initial_beliefs(model, initial_mean, _cause_at(causes, 0))
    margin = euler_stability_margin(model, beliefs, _cause_at(causes, 0), cfg)
    if margin >= STABILITY_LIMIT:
        logger.warning(
            f"kappa_x*dt*lambda_max = {margin:.3f} >= {STABILITY_LIMIT}; Euler updates may diverge"
        )

    trajectory = []
    for t, y in enumerate(embed_series(observations, sample_dt, order)):
        beliefs = step_estimate(model, beliefs, y, _cause_at(causes, t), cfg, step_index=t)
        trajectory.append(beliefs)

    logger.debug(f"Filtered {len(trajectory)} samples at order {order}")
    return trajectory
