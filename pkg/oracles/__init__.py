"""Reference implementations used to verify the agent package"""

from .brute_force import brute_force_plan_posterior
from .finite_difference import finite_difference, gradient, hessian, jacobian
from .kalman import KalmanState, kalman_step, steady_state_kalman

__all__ = [
    'brute_force_plan_posterior',
    'finite_difference',
    'gradient',
    'hessian',
    'jacobian',
    'KalmanState',
    'kalman_step',
    'steady_state_kalman',
]
