"""Periodic solutions and Floquet stability of damped Duffing equations."""

__version__ = "0.1.0"
