"""
Mountain car plant

Standard continuous-control formulation:

    v   <- clip(v + power * u - gravity * cos(3 pos), -max_speed, max_speed)
    pos <- clip(pos + v, min_position, max_position)

with the velocity zeroed when the car hits the left wall. The car is
observed noiselessly as (position, velocity). Episodes end at the goal
position or after max_steps.
"""

from typing import Optional

import numpy as np

from .base import BasePlant


MIN_POSITION = -1.2
MAX_POSITION = 0.6
MAX_SPEED = 0.07
POWER = 0.001
GRAVITY = 0.0025
MAX_STEPS = 200


class MountainCarPlant(BasePlant):
    """Under-powered car in a valley; the goal is on top of the right hill"""

    def __init__(
        self,
        force_limit: float = 1.0,
        goal_position: float = 0.45,
        sparse_reward: bool = True,
        start_low: float = -0.6,
        start_high: float = -0.4,
        max_steps: int = MAX_STEPS,
        seed: Optional[int] = None,
        name: str = "MountainCarPlant"
    ):
        """
        Initialize mountain car

        Args:
            force_limit: Actions are clipped to [-force_limit, force_limit]
            goal_position: Position that ends the episode with success
            sparse_reward: 1 at the goal and 0 elsewhere; otherwise a shaped
                reward that grows with position
            start_low: Lower bound of the random start position
            start_high: Upper bound of the random start position
            max_steps: Episode cap
            seed: Seed for start positions
            name: Name for logging
        """
        super().__init__(name=name, dt=1.0, input_dim=1, seed=seed)
        self.force_limit = force_limit
        self.goal_position = goal_position
        self.sparse_reward = sparse_reward
        self.start_low = start_low
        self.start_high = start_high
        self.max_steps = max_steps
        self.observation_bounds = (np.array([MIN_POSITION, -MAX_SPEED]),
                                   np.array([MAX_POSITION, MAX_SPEED]))
        self.reset(seed)

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.position = float(self.rng.uniform(self.start_low, self.start_high))
        self.velocity = 0.0
        self.steps = 0
        return self.observe()

    def place(self, position: float, velocity: float = 0.0):
        """Put the car at a given state"""
        self.position = float(position)
        self.velocity = float(velocity)

    def transition(self, position, velocity, u):
        """Vectorized one-step dynamics over arrays of states and actions"""
        u = np.clip(u, -self.force_limit, self.force_limit)
        velocity = np.clip(velocity + POWER * u - GRAVITY * np.cos(3.0 * position), -MAX_SPEED, MAX_SPEED)
        position = np.clip(position + velocity, MIN_POSITION, MAX_POSITION)
        velocity = np.where((position <= MIN_POSITION) & (velocity < 0), 0.0, velocity)
        return position, velocity

    def rollout(self, observation, actions) -> np.ndarray:
        """
        Predicted observations for a batch of action sequences

        Args:
            observation: Starting (position, velocity)
            actions: P x H x 1 action sequences

        Returns:
            P x H x 2 predicted observations
        """
        actions = np.asarray(actions, dtype=float)
        population, horizon = actions.shape[:2]
        position = np.full(population, observation[0], dtype=float)
        velocity = np.full(population, observation[1], dtype=float)
        predicted = np.empty((population, horizon, 2))
        for t in range(horizon):
            position, velocity = self.transition(position, velocity, actions[:, t, 0])
            predicted[:, t, 0] = position
            predicted[:, t, 1] = velocity
        return predicted

    def reward(self, observation) -> np.ndarray:
        """Reward of observations shaped (..., 2)"""
        position = np.asarray(observation, dtype=float)[..., 0]
        if self.sparse_reward:
            return (position >= self.goal_position).astype(float)
        return (position - MIN_POSITION) / (self.goal_position - MIN_POSITION)

    @property
    def state(self) -> np.ndarray:
        return np.array([self.position, self.velocity])

    @property
    def reached_goal(self) -> bool:
        return self.position >= self.goal_position

    @property
    def done(self) -> bool:
        return self.reached_goal or self.steps >= self.max_steps

    def observe(self) -> np.ndarray:
        return self.state

    def peek(self, u) -> np.ndarray:
        position, velocity = self.transition(self.position, self.velocity, self._check_input(u)[0])
        return np.array([float(position), float(velocity)])

    def step(self, u) -> np.ndarray:
        position, velocity = self.transition(self.position, self.velocity, self._check_input(u)[0])
        self.position, self.velocity = float(position), float(velocity)
        self.steps += 1
        return self.observe()
