"""
Action by free-energy descent

Provides:
- Sensory-action Jacobians (exact from the simulated plant, or sign-only)
- The action update u <- u - dt kappa_u J' Pz eps_y
- run_aic: the closed perception/action loop against a plant
- A discrete PID reference controller

Only the sensory term of F depends on the action, through the observations.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .base import DimensionError, check_finite
from .gencoords import GeneralizedVector, embed_taylor, taylor_weights
from .inference import (
    STABILITY_LIMIT,
    Beliefs,
    EstimatorConfig,
    euler_stability_margin,
    initial_beliefs,
    step_estimate,
    vfe,
)
from .model import GenerativeModel


logger = logging.getLogger(__name__)


class JacobianStrategy(str, Enum):
    EXACT = 'exact'
    SIGN_ONLY = 'sign_only'


@dataclass(frozen=True)
class ControllerConfig:
    """Action learning rate, step and sensory-Jacobian strategy"""
    kappa_u: float = 1.0
    dt: float = 0.005
    jacobian_strategy: JacobianStrategy = JacobianStrategy.EXACT

    def __post_init__(self):
        if not self.kappa_u >= 0:
            raise ValueError(f"kappa_u must be >= 0, got {self.kappa_u}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        try:
            strategy = JacobianStrategy(self.jacobian_strategy)
        except ValueError:
            valid = ', '.join(s.value for s in JacobianStrategy)
            raise ValueError(
                f"jacobian_strategy must be one of {valid}, got {self.jacobian_strategy!r}"
            ) from None
        object.__setattr__(self, 'jacobian_strategy', strategy)


@dataclass(frozen=True, eq=False)
class ActionState:
    u: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.array(self.u, dtype=float))
        check_finite(u, "action")
        u.setflags(write=False)
        object.__setattr__(self, 'u', u)


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        for name in ('kp', 'ki', 'kd'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class ClosedLoopTrace:
    """Per-step record of a closed loop"""
    times: List[float] = field(default_factory=list)
    observations: List[np.ndarray] = field(default_factory=list)
    means: List[np.ndarray] = field(default_factory=list)
    actions: List[np.ndarray] = field(default_factory=list)
    free_energy: List[float] = field(default_factory=list)
    plant_states: List[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def record(self, t, y, mean, u, F, state):
        self.times.append(float(t))
        self.observations.append(np.array(y, dtype=float))
        self.means.append(np.array(mean, dtype=float))
        self.actions.append(np.array(u, dtype=float))
        self.free_energy.append(float(F))
        self.plant_states.append(np.array(state, dtype=float))


def sign_jacobian(jac) -> np.ndarray:
    return np.sign(np.asarray(jac, dtype=float))


def generalize_action_jacobian(jac, order: int, dt: float) -> np.ndarray:
    """
    Chain a base sensory Jacobian through the Taylor embedding

    The action only changes the newest sample, so block k of the generalized
    Jacobian is W[k, 0] * jac, with W the embedding weights.

    Args:
        jac: q x m base Jacobian dy/du
        order: Embedding order p
        dt: Sampling interval of the embedding

    Returns:
        q(p+1) x m generalized Jacobian
    """
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    newest = taylor_weights(order, float(dt))[:, 0]
    return np.vstack([w * jac for w in newest])


def _plant_jacobian(plant, u: np.ndarray) -> np.ndarray:
    """Central differences of the plant's noise-free next observation"""
    columns = []
    for j in range(u.size):
        h = 1e-6 * max(1.0, abs(u[j]))
        step = np.zeros_like(u)
        step[j] = h
        columns.append((plant.peek(u + step) - plant.peek(u - step)) / (2 * h))
    return np.column_stack(columns)


def sensory_action_jacobian(strategy, plant, u, order: int = 0, nominal=None) -> np.ndarray:
    """
    Generalized Jacobian of observations with respect to actions

    Args:
        strategy: 'exact' (finite differences on the simulated plant) or
            'sign_only' (entrywise sign of the nominal Jacobian)
        plant: Simulated plant exposing peek(u) and dt
        u: Current action
        order: Embedding order of the observations
        nominal: Base Jacobian to use instead of querying the plant

    Returns:
        q(p+1) x m matrix
    """
    strategy = JacobianStrategy(strategy)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    base = _plant_jacobian(plant, u) if nominal is None else np.atleast_2d(np.asarray(nominal, dtype=float))
    jac = generalize_action_jacobian(base, order, plant.dt)
    if strategy is JacobianStrategy.SIGN_ONLY:
        return sign_jacobian(jac)
    return jac


def step_action(model: GenerativeModel, beliefs: Beliefs, y: GeneralizedVector, u,
                cfg: ControllerConfig, jac, step_index: Optional[int] = None) -> ActionState:
    """
    One descent step on the sensory term of F

    Args:
        model: Generative model
        beliefs: Current beliefs
        y: Generalized observation
        u: Current action
        cfg: Controller settings
        jac: q(p+1) x m generalized sensory-action Jacobian
        step_index: Index reported in divergence errors

    Returns:
        Updated ActionState
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    if jac.shape != (len(y), u.size):
        raise DimensionError(f"action Jacobian has shape {jac.shape}, expected {(len(y), u.size)}")

    eps_y = y.data - model.observation(beliefs.mean).data
    sensory_gradient = model.obs_noise.generalized_precision(y.order).matrix @ eps_y
    updated = u - cfg.dt * cfg.kappa_u * (jac.T @ sensory_gradient)
    check_finite(updated, "action", step_index)
    return ActionState(updated)


def run_aic(plant, model: GenerativeModel, estimator_cfg: EstimatorConfig,
            controller_cfg: ControllerConfig, horizon: int, order: int = 1,
            initial_mean: Optional[GeneralizedVector] = None, initial_u=None,
            nominal_jacobian=None) -> ClosedLoopTrace:
    """
    Closed-loop active inference control

    Each step: the plant moves under the current action, the new sample is
    embedded with its predecessors, beliefs descend F, then the action
    descends the sensory part of F.

    Args:
        plant: Simulated plant (step, observe, peek, dt, state)
        model: Generative model carrying the goal (e.g. AttractorModel)
        estimator_cfg: Perception settings
        controller_cfg: Action settings
        horizon: Number of plant steps
        order: Embedding order p
        initial_mean: Starting belief mean (zeros by default)
        initial_u: Starting action (zeros by default)
        nominal_jacobian: Base dy/du used instead of querying the plant

    Returns:
        ClosedLoopTrace with one record per step
    """
    y_now = np.atleast_1d(plant.observe())
    if y_now.size != model.obs_dim:
        raise DimensionError(f"plant emits {y_now.size} channels, model obs_dim is {model.obs_dim}")

    mean = GeneralizedVector.zeros(order, model.state_dim) if initial_mean is None else initial_mean
    beliefs = initial_beliefs(model, mean)
    margin = euler_stability_margin(model, beliefs, None, estimator_cfg)
    if margin >= STABILITY_LIMIT:
        logger.warning(
            f"kappa_x*dt*lambda_max = {margin:.3g} >= {STABILITY_LIMIT}; Euler updates may diverge"
        )
    u = np.zeros(plant.input_dim) if initial_u is None else np.atleast_1d(np.asarray(initial_u, dtype=float))
    history = deque([y_now] * (order + 1), maxlen=order + 1)

    trace = ClosedLoopTrace()
    for k in range(horizon):
        y_new = np.atleast_1d(plant.step(u))
        history.append(y_new)
        y = embed_taylor(np.array(history), plant.dt, order)

        beliefs = step_estimate(model, beliefs, y, None, estimator_cfg, step_index=k)
        jac = sensory_action_jacobian(
            controller_cfg.jacobian_strategy, plant, u, order, nominal=nominal_jacobian
        )
        u = step_action(model, beliefs, y, u, controller_cfg, jac, step_index=k).u
        trace.record((k + 1) * plant.dt, y_new, beliefs.mean.data, u, vfe(model, beliefs, y), plant.state)

    logger.debug(f"Closed loop ran {horizon} steps")
    return trace


class PidController:
    """
    Discrete PID: rectangle-rule integral, backward-difference derivative

    The first derivative sample is zero unless reset() was given the
    measurement preceding the first call.
    """

    def __init__(self, gains: PidGains, target, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.gains = gains
        self.target = np.atleast_1d(np.asarray(target, dtype=float))
        self.dt = dt
        self.reset()

    def reset(self, measurement=None):
        self.integral = np.zeros_like(self.target)
        self.previous_error = None if measurement is None else self._error(measurement)

    def _error(self, y) -> np.ndarray:
        return self.target - np.atleast_1d(np.asarray(y, dtype=float))

    def __call__(self, y) -> np.ndarray:
        error = self._error(y)
        self.integral = self.integral + error * self.dt
        if self.previous_error is None:
            derivative = np.zeros_like(error)
        else:
            derivative = (error - self.previous_error) / self.dt
        self.previous_error = error
        return self.gains.kp * error + self.gains.ki * self.integral + self.gains.kd * derivative


def pid_controller(gains: PidGains, target, dt: float) -> PidController:
    return PidController(gains, target, dt)
