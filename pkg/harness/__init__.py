"""Experiment harness for Free Energy Agent"""

__version__ = "1.0.0"
