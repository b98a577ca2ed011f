"""
Base plant class for Free Energy Agent

Provides common functionality:
- Naming and logging
- Seeded random generator management
- Step counting and run summaries
"""

import logging
from typing import Any, Dict, Optional

import numpy as np

import agent.base  # noqa: F401  (logging configuration)


class PlantError(Exception):
    """Raised when a plant is driven with malformed inputs"""
    pass


class BasePlant:
    """
    Base class for all simulated plants (generative processes)

    Handles:
    - Seeded randomness (every plant is deterministic given seed and actions)
    - Input validation
    - Step counting
    - Run summaries
    """

    def __init__(self, name: str = "BasePlant", dt: float = 1.0, input_dim: int = 1,
                 seed: Optional[int] = None):
        """
        Initialize base plant

        Args:
            name: Name for logging
            dt: Time between steps
            input_dim: Number of control inputs
            seed: Seed for the plant's random generator
        """
        if not dt > 0:
            raise PlantError(f"dt must be > 0, got {dt}")
        self.name = name
        self.dt = dt
        self.input_dim = input_dim
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.logger = logging.getLogger(name)

    def _check_input(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.size != self.input_dim:
            raise PlantError(f"{self.name} expects {self.input_dim} inputs, got {u.size}")
        return u

    def step(self, u) -> np.ndarray:
        """Advance one step under input u and return the new observation"""
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        """Most recent observation"""
        raise NotImplementedError

    def peek(self, u) -> np.ndarray:
        """Noise-free observation one step ahead under u, without advancing"""
        raise NotImplementedError

    @property
    def state(self) -> Any:
        raise NotImplementedError

    def log_summary(self, stats: Dict[str, Any]):
        """
        Log summary statistics

        Args:
            stats: Dictionary of statistics to log
        """
        self.logger.info("=" * 60)
        self.logger.info(f"{self.name} Summary")
        self.logger.info("=" * 60)
        for key, value in stats.items():
            self.logger.info(f"{key}: {value}")
        self.logger.info("=" * 60)


def step_plant(plant: BasePlant, u) -> np.ndarray:
    """
    Advance a plant one step

    Args:
        plant: Any BasePlant
        u: Input with plant.input_dim entries

    Returns:
        The observation after the step

    Raises:
        PlantError: If u has the wrong size
    """
    return np.atleast_1d(plant.step(u))
