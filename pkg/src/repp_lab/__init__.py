"""Rare-event point processes for chaotic maps: simulation, limit laws and tests."""

__version__ = "0.1.0"
