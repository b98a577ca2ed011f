"""Simulated plants for Free Energy Agent"""

from .base import BasePlant, PlantError, step_plant
from .lti import LTIPlant, integrator_plant
from .mountain_car import MountainCarPlant
from .noise import ColoredNoiseConfig, ColoredNoiseStream, colored_noise
from .tmaze import TMazeEnv, tmaze_as_pomdp

__all__ = [
    'BasePlant',
    'PlantError',
    'step_plant',
    'LTIPlant',
    'integrator_plant',
    'MountainCarPlant',
    'ColoredNoiseConfig',
    'ColoredNoiseStream',
    'colored_noise',
    'TMazeEnv',
    'tmaze_as_pomdp',
]
