"""Closed-loop simulation, likelihood-space regret scoring, and failure mining."""

__version__ = "0.1.0"
