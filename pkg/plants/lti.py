"""
Linear time-invariant plant

Euler-Maruyama simulation of x' = A x + B u with additive process and
observation noise:

    x <- x + dt (A x + B u) + w
    y <- C x + z

w and z are per-step draws from colored noise sources; their covariances
are per-step covariances (a continuous-time model of the same plant sees
process covariance Q / dt^2).
"""

from typing import Optional

import numpy as np

from agent.base import DimensionError, as_matrix
from .base import BasePlant, PlantError
from .noise import ColoredNoiseConfig, ColoredNoiseStream


class LTIPlant(BasePlant):
    """Discrete-time linear plant with optional colored noise"""

    def __init__(
        self,
        A,
        B,
        C,
        x0,
        dt: float,
        process_noise: Optional[ColoredNoiseConfig] = None,
        obs_noise: Optional[ColoredNoiseConfig] = None,
        name: str = "LTIPlant"
    ):
        """
        Initialize LTI plant

        Args:
            A: n x n state matrix
            B: n x m input matrix
            C: q x n output matrix
            x0: Initial state
            dt: Time step
            process_noise: Per-step process noise (None for noiseless)
            obs_noise: Observation noise (None for noiseless)
            name: Name for logging
        """
        A = as_matrix(A, 'A')
        B = as_matrix(B, 'B')
        C = as_matrix(C, 'C')
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows but A is {n}x{n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns but A is {n}x{n}")
        if process_noise is not None and process_noise.dim != n:
            raise DimensionError(f"process noise is {process_noise.dim}-dimensional, state is {n}")
        if obs_noise is not None and obs_noise.dim != C.shape[0]:
            raise DimensionError(f"observation noise is {obs_noise.dim}-dimensional, output is {C.shape[0]}")

        super().__init__(name=name, dt=dt, input_dim=B.shape[1])
        self.A, self.B, self.C = A, B, C
        self.transition = np.eye(n) + dt * A
        self.process_noise = process_noise
        self.obs_noise = obs_noise
        self.x0 = np.atleast_1d(np.array(x0, dtype=float))
        if self.x0.size != n:
            raise PlantError(f"x0 has {self.x0.size} entries, state dimension is {n}")
        self.reset()

    def reset(self, seed=None) -> np.ndarray:
        """Return to x0 with fresh noise streams (seeds come from the noise configs)"""
        self.x = self.x0.copy()
        self.steps = 0
        self._process = ColoredNoiseStream(self.process_noise, self.dt) if self.process_noise else None
        self._obs = ColoredNoiseStream(self.obs_noise, self.dt) if self.obs_noise else None
        self.y = self._measure()
        return self.observe()

    def _measure(self) -> np.ndarray:
        y = self.C @ self.x
        if self._obs is not None:
            y = y + self._obs.next()
        return y

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.C.shape[0]

    @property
    def state(self) -> np.ndarray:
        return self.x.copy()

    def observe(self) -> np.ndarray:
        return self.y.copy()

    def _drift(self, u: np.ndarray) -> np.ndarray:
        drive = self.transition @ self.x
        if self.input_dim:
            drive = drive + self.dt * (self.B @ u)
        return drive

    def peek(self, u) -> np.ndarray:
        return self.C @ self._drift(self._check_input(u))

    def step(self, u) -> np.ndarray:
        x = self._drift(self._check_input(u))
        if self._process is not None:
            x = x + self._process.next()
        self.x = x
        self.y = self._measure()
        self.steps += 1
        return self.observe()


def integrator_plant(dofs: int = 1, dt: float = 0.01, x0=None,
                     obs_noise: Optional[ColoredNoiseConfig] = None) -> LTIPlant:
    """n-DOF integrator actuator: x' = u, y = x"""
    x0 = np.zeros(dofs) if x0 is None else x0
    return LTIPlant(np.zeros((dofs, dofs)), np.eye(dofs), np.eye(dofs), x0, dt,
                    obs_noise=obs_noise, name="IntegratorPlant")
