"""
Finite-difference derivatives

Central differences for gradients and Jacobians; nested central
differences for Hessians. Steps scale with each coordinate's magnitude.
"""

from typing import Callable, Optional

import numpy as np


def _steps(x: np.ndarray, h: Optional[float], base: float) -> np.ndarray:
    if h is not None:
        if not h > 0:
            raise ValueError(f"h must be > 0, got {h}")
        return np.full(x.size, float(h))
    return base * np.maximum(1.0, np.abs(x))


def jacobian(fn: Callable, x, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian of fn at x (a row vector for scalar fn)"""
    x = np.asarray(x, dtype=float).reshape(-1)
    steps = _steps(x, h, 1e-6)
    columns = []
    for i, step in enumerate(steps):
        forward, backward = x.copy(), x.copy()
        forward[i] += step
        backward[i] -= step
        columns.append((np.atleast_1d(fn(forward)) - np.atleast_1d(fn(backward))) / (2.0 * step))
    return np.column_stack(columns)


def gradient(fn: Callable, x, h: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient of a scalar fn at x"""
    return jacobian(fn, x, h)[0]


def hessian(fn: Callable, x, h: Optional[float] = None) -> np.ndarray:
    """Nested central-difference Hessian of a scalar fn at x"""
    x = np.asarray(x, dtype=float).reshape(-1)
    steps = _steps(x, h, 1e-4)
    n = x.size
    result = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            total = 0.0
            for si, sj, sign in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
                point = x.copy()
                point[i] += si * steps[i]
                point[j] += sj * steps[j]
                total += sign * float(fn(point))
            result[i, j] = result[j, i] = total / (4.0 * steps[i] * steps[j])
    return result


def finite_difference(fn: Callable, x, h: Optional[float] = None, kind: str = 'gradient') -> np.ndarray:
    """
    Derivative oracle

    Args:
        fn: vector -> real (gradient, hessian) or vector -> vector (jacobian)
        x: Evaluation point
        h: Fixed step (scaled per coordinate when omitted)
        kind: 'gradient', 'jacobian' or 'hessian'
    """
    kinds = {'gradient': gradient, 'jacobian': jacobian, 'hessian': hessian}
    if kind not in kinds:
        raise ValueError(f"kind must be one of {sorted(kinds)}, got {kind!r}")
    return kinds[kind](fn, x, h)
