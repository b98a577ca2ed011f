"""
Kalman filter reference

Standard predict/update with the Joseph-form covariance update, plus the
steady-state solution of the filtering Riccati equation.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from agent.base import SingularMatrixError


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        covariance = np.atleast_2d(np.array(self.covariance, dtype=float))
        if covariance.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {covariance.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'covariance', 0.5 * (covariance + covariance.T))


def kalman_step(A, B, C, Q, R, state: KalmanState, u, y) -> KalmanState:
    """
    One predict/update cycle

    Args:
        A, B, C: Discrete-time plant matrices (x' = A x + B u, y = C x)
        Q, R: Process and measurement noise covariances
        state: Posterior from the previous step
        u: Input applied since the previous step
        y: New measurement

    Returns:
        Posterior KalmanState

    Raises:
        SingularMatrixError: If the innovation covariance is singular
    """
    A, B, C, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, C, Q, R))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))

    # predict
    mean = A @ state.mean + (B @ u if B.size else 0.0)
    P = A @ state.covariance @ A.T + Q

    # update
    S = C @ P @ C.T + R
    try:
        K = linalg.solve(S, C @ P, assume_a='pos').T
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularMatrixError(f"innovation covariance is singular: {e}") from e

    mean = mean + K @ (y - C @ mean)
    I_KC = np.eye(P.shape[0]) - K @ C
    P = I_KC @ P @ I_KC.T + K @ R @ K.T
    return KalmanState(mean, P)


def steady_state_kalman(A, C, Q, R) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Stationary filter from the discrete algebraic Riccati equation

    Returns:
        (prior covariance, posterior covariance, Kalman gain)
    """
    A, C, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, C, Q, R))
    prior = linalg.solve_discrete_are(A.T, C.T, Q, R)
    S = C @ prior @ C.T + R
    gain = linalg.solve(S, C @ prior, assume_a='pos').T
    posterior = prior - gain @ C @ prior
    return prior, 0.5 * (posterior + posterior.T), gain
