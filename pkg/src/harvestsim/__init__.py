"""Lumped-parameter co-simulation of vibration and motion energy harvesters."""

__version__ = "0.1.0"
