"""
T-maze environment

Four locations (center, left arm, right arm, cue) and a hidden context
saying which arm is rewarded. The cue location reveals the context; the
arms are absorbing and pay out with probability reward_probability in the
rewarded arm (1 - reward_probability in the other).

Hidden state index = location * 2 + context. Observations:

    0 center, 1 cue says left, 2 cue says right,
    3 left reward, 4 left no reward, 5 right reward, 6 right no reward

Actions are "move to location a".
"""

from typing import Optional

import numpy as np

from agent.planning import DiscretePOMDP
from .base import BasePlant, PlantError


CENTER, LEFT, RIGHT, CUE = range(4)
LOCATIONS = ('center', 'left', 'right', 'cue')
CONTEXTS = ('left', 'right')
OBSERVATIONS = ('center', 'cue_left', 'cue_right', 'left_reward', 'left_no_reward',
                'right_reward', 'right_no_reward')
REWARD_OBSERVATIONS = (3, 5)
LOSS_OBSERVATIONS = (4, 6)
ARMS = (LEFT, RIGHT)


def state_index(location: int, context: int) -> int:
    return location * len(CONTEXTS) + context


class TMazeEnv(BasePlant):
    """Cue-guided T-maze with a hidden rewarded arm"""

    def __init__(
        self,
        reward_probability: float = 0.9,
        cue_validity: float = 1.0,
        preference: float = 3.0,
        seed: Optional[int] = None,
        name: str = "TMazeEnv"
    ):
        """
        Initialize T-maze

        Args:
            reward_probability: Payout probability in the rewarded arm
            cue_validity: Probability the cue reports the true context
            preference: Log-preference for reward (and its negative for no reward)
            seed: Seed for contexts and observation sampling
            name: Name for logging
        """
        for label, value in (('reward_probability', reward_probability), ('cue_validity', cue_validity)):
            if not 0.0 <= value <= 1.0:
                raise PlantError(f"{label} must be in [0, 1], got {value}")
        if not abs(cue_validity - 0.5) > abs(reward_probability - 0.5):
            raise PlantError(
                f"the cue (validity {cue_validity}) must be more informative than an arm "
                f"(reward_probability {reward_probability})"
            )
        super().__init__(name=name, dt=1.0, input_dim=1, seed=seed)
        self.reward_probability = reward_probability
        self.cue_validity = cue_validity
        self.preference = preference
        self._pomdp = None
        self.reset(seed)

    def likelihood(self) -> np.ndarray:
        """O x S observation model p(y | location, context)"""
        matrix = np.zeros((len(OBSERVATIONS), len(LOCATIONS) * len(CONTEXTS)))
        p, c = self.reward_probability, self.cue_validity
        for context in range(len(CONTEXTS)):
            matrix[0, state_index(CENTER, context)] = 1.0
            matrix[1, state_index(CUE, context)] = c if context == 0 else 1.0 - c
            matrix[2, state_index(CUE, context)] = 1.0 - c if context == 0 else c

            left_pays = p if context == 0 else 1.0 - p
            matrix[3, state_index(LEFT, context)] = left_pays
            matrix[4, state_index(LEFT, context)] = 1.0 - left_pays
            matrix[5, state_index(RIGHT, context)] = 1.0 - left_pays
            matrix[6, state_index(RIGHT, context)] = left_pays
        return matrix

    def transitions(self) -> np.ndarray:
        """U x S x S move dynamics; arms are absorbing, context never changes"""
        num_states = len(LOCATIONS) * len(CONTEXTS)
        matrices = np.zeros((len(LOCATIONS), num_states, num_states))
        for action in range(len(LOCATIONS)):
            for location in range(len(LOCATIONS)):
                destination = location if location in ARMS else action
                for context in range(len(CONTEXTS)):
                    matrices[action, state_index(destination, context), state_index(location, context)] = 1.0
        return matrices

    def preferences(self) -> np.ndarray:
        prefs = np.zeros(len(OBSERVATIONS))
        prefs[list(REWARD_OBSERVATIONS)] = self.preference
        prefs[list(LOSS_OBSERVATIONS)] = -self.preference
        return prefs

    def prior(self) -> np.ndarray:
        prior = np.zeros(len(LOCATIONS) * len(CONTEXTS))
        prior[state_index(CENTER, 0)] = prior[state_index(CENTER, 1)] = 0.5
        return prior

    def as_pomdp(self) -> DiscretePOMDP:
        if self._pomdp is None:
            self._pomdp = tmaze_as_pomdp(self)
        return self._pomdp

    def reset(self, seed: Optional[int] = None) -> int:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.context = int(self.rng.integers(len(CONTEXTS)))
        self.location = CENTER
        self.steps = 0
        self.last_observation = self._sample_observation()
        self.reward = 0.0
        self.reached_goal = False
        return self.last_observation

    def _sample_observation(self) -> int:
        column = self.likelihood()[:, state_index(self.location, self.context)]
        return int(self.rng.choice(len(OBSERVATIONS), p=column))

    @property
    def state(self) -> int:
        return self.location

    @property
    def done(self) -> bool:
        return self.location in ARMS

    def observe(self) -> int:
        return self.last_observation

    def step(self, u) -> int:
        action = int(self._check_input(u)[0])
        if not 0 <= action < len(LOCATIONS):
            raise PlantError(f"action must be a location index 0..{len(LOCATIONS) - 1}, got {action}")
        if self.location not in ARMS:
            self.location = action
        self.steps += 1
        self.last_observation = self._sample_observation()
        if self.last_observation in REWARD_OBSERVATIONS:
            self.reward, self.reached_goal = 1.0, True
        elif self.last_observation in LOSS_OBSERVATIONS:
            self.reward = -1.0
        else:
            self.reward = 0.0
        return self.last_observation


def tmaze_as_pomdp(env: TMazeEnv) -> DiscretePOMDP:
    """The agent's generative model of a T-maze"""
    return DiscretePOMDP(
        likelihood=env.likelihood(),
        transitions=env.transitions(),
        preferences=env.preferences(),
        prior=env.prior(),
    )
